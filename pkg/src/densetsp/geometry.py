"""City tiling, bounded densities, well-connected city selection and node processes.

Coordinates live in the closed unit square [0, 1]^2.  A city is an r x r
axis-aligned square; neighbouring cities are separated by a gap s, and the
tiling exists only when (1 - r) / (r + s) is an integer m, giving m + 1
cities per axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConnectivityError, ParameterError
from .rng import stream

INTEGRALITY_TOL = 1e-9
_CONTAIN_TOL = 1e-12


# ---------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class DensityField:
    """Piecewise-constant density on a ``k x k`` grid over the unit square.

    ``cells[i, j]`` is the density value on ``[i/k, (i+1)/k] x [j/k, (j+1)/k]``.
    The constructor checks the bounds ``eps1 <= f <= eps2`` and that the
    density integrates to one.
    """

    cells: np.ndarray
    eps1: float = 0.0
    eps2: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        cells = np.array(self.cells, dtype=float)
        if cells.ndim != 2 or cells.shape[0] != cells.shape[1] or cells.shape[0] < 1:
            raise ParameterError("density cells must form a non-empty square grid")
        lo, hi = float(cells.min()), float(cells.max())
        eps1 = self.eps1 if self.eps1 > 0 else lo
        eps2 = self.eps2 if self.eps2 > 0 else hi
        if not (0 < eps1 <= eps2 < math.inf):
            raise ParameterError(f"need 0 < eps1 <= eps2 < inf, got eps1={eps1}, eps2={eps2}")
        if lo < eps1 or hi > eps2:
            raise ParameterError(
                f"density values [{lo}, {hi}] fall outside declared bounds [{eps1}, {eps2}]"
            )
        total = math.fsum(cells.ravel()) / cells.size
        if abs(total - 1.0) > 1e-12:
            raise ParameterError(f"density integrates to {total!r}, not 1")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "eps1", float(eps1))
        object.__setattr__(self, "eps2", float(eps2))

    @classmethod
    def uniform(cls, resolution: int = 16) -> "DensityField":
        return cls(np.ones((resolution, resolution)), name="uniform")

    @classmethod
    def checker(cls, ratio: float, resolution: int = 16) -> "DensityField":
        """Two-level checkerboard with ``max / min == ratio``."""
        if ratio < 1:
            raise ParameterError(f"checker ratio must be >= 1, got {ratio}")
        i, j = np.indices((resolution, resolution))
        raw = np.where((i + j) % 2 == 0, 1.0, float(ratio))
        cells = raw / raw.mean()
        # renormalise against the exactly-rounded mean so the integral test is tight
        cells = cells / (math.fsum(cells.ravel()) / cells.size)
        return cls(cells, name=f"checker:{ratio:g}")

    @classmethod
    def parse(cls, spec: str, resolution: int = 16) -> "DensityField":
        """Build a density from ``"uniform"`` or ``"checker:<ratio>"``."""
        spec = spec.strip()
        if spec == "uniform":
            return cls.uniform(resolution)
        if spec.startswith("checker:"):
            try:
                ratio = float(spec.split(":", 1)[1])
            except ValueError:
                raise ParameterError(f"bad checker ratio in density spec {spec!r}") from None
            return cls.checker(ratio, resolution)
        raise ParameterError(f"unknown density spec {spec!r} (expected uniform or checker:<ratio>)")

    @property
    def resolution(self) -> int:
        return self.cells.shape[0]

    @property
    def eta1(self) -> float:
        return self.eps1 / self.eps2

    @property
    def eta2(self) -> float:
        return self.eps2 / self.eps1

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        k = self.resolution
        idx = np.clip(np.floor(pts * k).astype(int), 0, k - 1)
        return self.cells[idx[:, 0], idx[:, 1]]

    def integrate_box(self, x0: float, y0: float, side: float) -> float:
        """Exact integral of the density over ``[x0, x0+side] x [y0, y0+side]``."""
        k = self.resolution
        edges = np.arange(k + 1) / k
        ox = np.clip(np.minimum(edges[1:], x0 + side) - np.maximum(edges[:-1], x0), 0.0, None)
        oy = np.clip(np.minimum(edges[1:], y0 + side) - np.maximum(edges[:-1], y0), 0.0, None)
        return float(ox @ self.cells @ oy)


# ---------------------------------------------------------------------------
# tiling


def _near_integer(q: float) -> Optional[int]:
    m = round(q)
    return int(m) if abs(q - m) <= INTEGRALITY_TOL else None


@dataclass(frozen=True)
class CityGrid:
    r: float
    s: float
    per_axis: int

    @property
    def pitch(self) -> float:
        return self.r + self.s

    @property
    def count(self) -> int:
        return self.per_axis * self.per_axis

    @property
    def origins(self) -> np.ndarray:
        """Lower-left corners, indexed by city id ``i * per_axis + j``."""
        i, j = np.divmod(np.arange(self.count), self.per_axis)
        return np.column_stack([i * self.pitch, j * self.pitch])

    def lattice(self, city: int) -> tuple[int, int]:
        i, j = divmod(int(city), self.per_axis)
        return i, j

    def city_id(self, i: int, j: int) -> int:
        if not (0 <= i < self.per_axis and 0 <= j < self.per_axis):
            raise ParameterError(f"lattice point ({i}, {j}) is outside the {self.per_axis}x{self.per_axis} grid")
        return int(i) * self.per_axis + int(j)

    def neighbours(self, city: int) -> list[int]:
        i, j = self.lattice(city)
        out = []
        for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            a, b = i + di, j + dj
            if 0 <= a < self.per_axis and 0 <= b < self.per_axis:
                out.append(a * self.per_axis + b)
        return out


def snap_parameters(r_target: float, s_target: float) -> tuple[float, float]:
    """Nearest admissible ``(r, s)`` keeping ``r`` and widening ``s``.

    ``r`` stays at ``r_target``; the city count per axis minus one,
    ``m = floor((1 - r) / (r + s_target))``, is kept and the gap grows to
    ``(1 - r) / m - r``.  Already admissible pairs come back unchanged.
    """
    if not (r_target > 0 and s_target > 0 and r_target + s_target < 1):
        raise ParameterError(
            f"need r > 0, s > 0 and r + s < 1, got r={r_target}, s={s_target}"
        )
    q = (1.0 - r_target) / (r_target + s_target)
    if _near_integer(q) is not None and _near_integer(q) >= 1:
        return float(r_target), float(s_target)
    m = math.floor(q)
    while m >= 1:
        s = (1.0 - r_target) / m - r_target
        if s >= s_target:
            return float(r_target), float(s)
        m -= 1
    raise ParameterError(f"no admissible tiling with r={r_target} and s >= {s_target}")


def build_city_grid(r: float, s: float) -> CityGrid:
    if not (r > 0 and s > 0 and r + s < 1):
        raise ParameterError(f"need r > 0, s > 0 and r + s < 1, got r={r}, s={s}")
    q = (1.0 - r) / (r + s)
    m = _near_integer(q)
    if m is None or m < 1:
        try:
            hint = "nearest admissible (r, s) = ({:.17g}, {:.17g})".format(*snap_parameters(r, s))
        except ParameterError:
            hint = "no admissible gap exists for this r"
        raise ParameterError(f"(1 - r)/(r + s) = {q:.12g} is not an integer; {hint}")
    return CityGrid(float(r), float(s), m + 1)


# ---------------------------------------------------------------------------
# selections


def lattice_connected(coords: Sequence[Sequence[int]]) -> bool:
    """True when the lattice points form one component under 4-adjacency."""
    pts = {tuple(int(v) for v in c) for c in coords}
    if not pts:
        return False
    start = next(iter(pts))
    seen = {start}
    todo = [start]
    while todo:
        x, y = todo.pop()
        for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if nb in pts and nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(pts)


@dataclass(frozen=True)
class CitySelection:
    """A well-connected set of cities; position ``l`` in ``indices`` is city ``l``."""

    grid: CityGrid
    indices: tuple[int, ...]
    lattice_coords: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(idx) < 1:
            raise ParameterError("a selection needs at least one city")
        if len(set(idx)) != len(idx):
            raise ParameterError("duplicate city in selection")
        if any(not (0 <= i < self.grid.count) for i in idx):
            raise ParameterError("selected city id outside the grid")
        coords = np.array([self.grid.lattice(i) for i in idx], dtype=int).reshape(-1, 2)
        if not lattice_connected(coords):
            raise ConnectivityError("selected cities are not well-connected on the lattice")
        coords.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "lattice_coords", coords)

    @classmethod
    def from_lattice(cls, grid: CityGrid, coords) -> "CitySelection":
        return cls(grid, tuple(grid.city_id(i, j) for i, j in coords))

    @property
    def N(self) -> int:
        return len(self.indices)

    @property
    def r(self) -> float:
        return self.grid.r

    @property
    def s(self) -> float:
        return self.grid.s

    @property
    def origins(self) -> np.ndarray:
        return self.grid.origins[list(self.indices)]

    def adjacency(self) -> list[list[int]]:
        """Lattice neighbours of each city, as positions within the selection."""
        pos = {c: l for l, c in enumerate(self.indices)}
        return [sorted(pos[nb] for nb in self.grid.neighbours(c) if nb in pos) for c in self.indices]

    def masses(self, f: DensityField) -> np.ndarray:
        """``q_l``: the density mass of each selected city."""
        return np.array([f.integrate_box(x, y, self.r) for x, y in self.origins])

    def probabilities(self, f: DensityField) -> np.ndarray:
        """``p_l``: probability that a node of the city process lands in city ``l``."""
        q = self.masses(f)
        return q / math.fsum(q)


def select_well_connected(grid: CityGrid, N: int, rng: np.random.Generator) -> CitySelection:
    """Grow a random lattice animal of ``N`` cities.

    Starts from a uniformly chosen city and repeatedly adds a uniformly
    chosen city from the current frontier (unselected lattice neighbours).
    """
    if not (1 <= N <= grid.count):
        raise ParameterError(f"N must lie in [1, {grid.count}], got {N}")
    first = int(rng.integers(grid.count))
    chosen = {first}
    frontier = set(grid.neighbours(first))
    while len(chosen) < N:
        options = sorted(frontier)
        pick = options[int(rng.integers(len(options)))]
        chosen.add(pick)
        frontier.discard(pick)
        frontier.update(nb for nb in grid.neighbours(pick) if nb not in chosen)
    return CitySelection(grid, tuple(sorted(chosen)))


# ---------------------------------------------------------------------------
# node processes


@dataclass(frozen=True, eq=False)
class Instance:
    """A sampled node set.

    ``city_of[i]`` is the selection position of the city holding node ``i``,
    or -1 for instances drawn on the whole unit square (``selection is None``).
    ``n`` is the node count for binomial instances and the mean for Poisson ones.
    """

    nodes: np.ndarray
    city_of: np.ndarray
    process: str
    n: float
    seed: int
    selection: Optional[CitySelection] = None
    density: str = "uniform"

    def __post_init__(self):
        if self.process not in ("binomial", "poisson"):
            raise ParameterError(f"unknown process kind {self.process!r}")
        nodes = np.array(self.nodes, dtype=float).reshape(-1, 2)
        city_of = np.array(self.city_of, dtype=np.int64).reshape(-1)
        if len(city_of) != len(nodes):
            raise ParameterError("city_of must have one entry per node")
        nodes.setflags(write=False)
        city_of.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "city_of", city_of)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def counts(self) -> np.ndarray:
        """Per-city node counts ``N_l``."""
        if self.selection is None:
            return np.array([self.size])
        return np.bincount(self.city_of, minlength=self.selection.N)

    def city_nodes(self, l: int) -> np.ndarray:
        return np.flatnonzero(self.city_of == l)

    def contained(self) -> bool:
        """Check every node against its assigned square."""
        if self.selection is None:
            return bool(np.all((self.nodes >= -_CONTAIN_TOL) & (self.nodes <= 1 + _CONTAIN_TOL)))
        if np.any((self.city_of < 0) | (self.city_of >= self.selection.N)):
            return False
        lo = self.selection.origins[self.city_of]
        rel = self.nodes - lo
        return bool(np.all((rel >= -_CONTAIN_TOL) & (rel <= self.selection.r + _CONTAIN_TOL)))


def rejection_sample(
    origins: np.ndarray,
    side: float,
    f: DensityField,
    count: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Draw ``count`` i.i.d. points with density proportional to ``f`` on a union of squares.

    The squares all have side ``side`` and are given by their lower-left
    corners.  Proposals pick a square uniformly, then a uniform point in it,
    and are accepted with probability ``f(x) / max f``.  Returns the points,
    the index of the square holding each one, and the number of proposals.
    """
    origins = np.asarray(origins, dtype=float).reshape(-1, 2)
    pts = np.empty((count, 2))
    which = np.empty(count, dtype=np.int64)
    fmax = float(f.cells.max())
    uniform = float(f.cells.min()) == fmax
    have = 0
    proposed = 0
    while have < count:
        need = count - have
        batch = max(16, int(1.3 * need / (f.eps1 / f.eps2)))
        box = rng.integers(len(origins), size=batch)
        cand = origins[box] + side * rng.random((batch, 2))
        if uniform:
            ok = np.ones(batch, dtype=bool)
        else:
            ok = rng.random(batch) * fmax < f(cand)
        acc = np.flatnonzero(ok)
        if len(acc) > need:
            # proposals are consumed in order, so stop exactly at the last one used
            acc = acc[:need]
            proposed += int(acc[-1]) + 1
        else:
            proposed += batch
        take = len(acc)
        pts[have:have + take] = cand[acc]
        which[have:have + take] = box[acc]
        have += take
    return pts, which, proposed


def sample_binomial(selection: CitySelection, f: DensityField, n: int, seed: int) -> Instance:
    """``n`` i.i.d. nodes with density ``f`` restricted to the selected cities."""
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n}")
    rng = stream(seed, "sampling")
    pts, which, _ = rejection_sample(selection.origins, selection.r, f, int(n), rng)
    return Instance(pts, which, "binomial", int(n), int(seed), selection, f.name)


def sample_poisson(selection: CitySelection, f: DensityField, mean_n: float, seed: int) -> Instance:
    """Poisson process with intensity ``mean_n * g_N``.

    City counts are independent Poisson(``mean_n * p_l``); given its count,
    each city's nodes are i.i.d. with the density restricted to that city.
    """
    if not mean_n > 0:
        raise ParameterError(f"Poisson mean must be positive, got {mean_n}")
    rng = stream(seed, "sampling")
    counts = rng.poisson(mean_n * selection.probabilities(f))
    origins = selection.origins
    chunks, labels = [], []
    for l, k in enumerate(counts):
        if k == 0:
            continue
        pts, _, _ = rejection_sample(origins[l:l + 1], selection.r, f, int(k), rng)
        chunks.append(pts)
        labels.append(np.full(int(k), l))
    nodes = np.vstack(chunks) if chunks else np.empty((0, 2))
    city_of = np.concatenate(labels) if labels else np.empty(0, dtype=np.int64)
    return Instance(nodes, city_of, "poisson", float(mean_n), int(seed), selection, f.name)


def sample_unit_square(f: DensityField, n: int, seed: int) -> Instance:
    """``n`` i.i.d. nodes with density ``f`` on the whole unit square."""
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n}")
    rng = stream(seed, "sampling")
    pts, _, _ = rejection_sample(np.zeros((1, 2)), 1.0, f, int(n), rng)
    return Instance(pts, np.full(int(n), -1), "binomial", int(n), int(seed), None, f.name)
