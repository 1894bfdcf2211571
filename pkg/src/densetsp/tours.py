"""Spanning cycles: construction, exact solution, bounds and merging.

A cycle is stored as an ``order`` array of node indices into a point array;
the last node connects back to the first.  Orders of length 1 and 2 are
allowed internally (a single node, and a node pair traversed there and back)
because the city-merging step has to handle sparsely populated cities.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    CapabilityError,
    ConnectivityError,
    ContainmentError,
    DegenerateInputError,
    InapplicableError,
    InvariantViolation,
    ParameterError,
    PolicyError,
    PreconditionError,
)

EXACT_CAP = 18
MERGE_MIN_NODES = 8
_CONTAIN_TOL = 1e-12


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ParameterError(f"points must have shape (n, 2), got {pts.shape}")
    return pts


def cycle_length(points, order) -> float:
    """Euclidean length of the closed walk through ``points[order]``."""
    pts = _as_points(points)
    order = np.asarray(order, dtype=np.int64)
    if len(order) < 2:
        return 0.0
    seq = pts[order]
    diffs = seq - np.roll(seq, -1, axis=0)
    return float(np.hypot(diffs[:, 0], diffs[:, 1]).sum())


def node_edge_sums(points, order) -> np.ndarray:
    """For each position in the cycle, the summed length of its two incident edges."""
    pts = _as_points(points)
    seq = pts[np.asarray(order, dtype=np.int64)]
    fwd = np.hypot(*(seq - np.roll(seq, -1, axis=0)).T)
    return fwd + np.roll(fwd, 1)


@dataclass(frozen=True, eq=False)
class Tour:
    order: np.ndarray
    length: float

    @classmethod
    def from_order(cls, points, order) -> "Tour":
        order = np.array(order, dtype=np.int64)
        order.setflags(write=False)
        return cls(order, cycle_length(points, order))

    def __len__(self):
        return len(self.order)

    def spans(self, indices) -> bool:
        """True when ``order`` visits exactly the given node indices once each."""
        idx = np.asarray(indices, dtype=np.int64)
        return len(self.order) == len(idx) and np.array_equal(np.sort(self.order), np.sort(idx))

    def is_permutation(self, n: int) -> bool:
        return len(self.order) == n and np.array_equal(np.sort(self.order), np.arange(n))

    def edges(self) -> np.ndarray:
        return np.column_stack([self.order, np.roll(self.order, -1)])


def tour_length(points, tour: Union[Tour, Sequence[int]]) -> float:
    pts = _as_points(points)
    if len(pts) < 3:
        raise DegenerateInputError(f"a tour needs at least 3 points, got {len(pts)}")
    order = tour.order if isinstance(tour, Tour) else np.asarray(tour, dtype=np.int64)
    if not (len(order) == len(pts) and np.array_equal(np.sort(order), np.arange(len(pts)))):
        raise ParameterError("tour order is not a permutation of the point indices")
    return cycle_length(pts, order)


# ---------------------------------------------------------------------------
# strips construction


@dataclass(frozen=True)
class StripsCertificate:
    a: int
    b: float
    c: float
    bound: float

    @property
    def strips(self) -> int:
        return int(round(self.b / self.c))


def strips_bound(a: int, b: float, c: float) -> float:
    return b * b / c + a * c * math.sqrt(2.0) + 2.0 * b


def auto_strip_count(a: int) -> int:
    return max(1, int(round(math.sqrt(a))))


def strips_tour(points, origin=(0.0, 0.0), side: float = 1.0, width: Union[float, str] = "auto"):
    """Serpentine tour through vertical strips of a square.

    Points are bucketed into ``side / width`` strips and visited top to
    bottom in the first strip, bottom to top in the second, and so on.  The
    returned certificate carries ``b^2/c + a c sqrt(2) + 2b``, and the tour
    length is checked against it before returning.  ``width="auto"`` uses
    ``c = b / sqrt(a)`` rounded so that ``b / c`` is a whole number.
    """
    pts = _as_points(points)
    a = len(pts)
    if a < 1:
        raise DegenerateInputError("strips_tour needs at least one point")
    if not side > 0:
        raise ParameterError(f"square side must be positive, got {side}")
    x0, y0 = float(origin[0]), float(origin[1])
    rel = pts - (x0, y0)
    if np.any(rel < -_CONTAIN_TOL) or np.any(rel > side + _CONTAIN_TOL):
        raise ContainmentError("all points must lie inside the square")
    if width == "auto":
        k = auto_strip_count(a)
    else:
        c_req = float(width)
        if not c_req > 0:
            raise ParameterError(f"strip width must be positive, got {width}")
        q = side / c_req
        k = int(round(q))
        if k < 1 or abs(q - k) > 1e-9 * max(1.0, q):
            raise ParameterError(f"side / strip width = {q:.12g} must be a positive integer")
    c = side / k
    strip = np.clip(np.floor(rel[:, 0] / c).astype(np.int64), 0, k - 1)
    y = rel[:, 1]
    # even strips (0-based) run top to bottom, odd strips bottom to top
    key_y = np.where(strip % 2 == 0, -y, y)
    order = np.lexsort((np.arange(a), key_y, strip))
    tour = Tour.from_order(pts, order)
    cert = StripsCertificate(a, float(side), c, strips_bound(a, side, c))
    if tour.length > cert.bound * (1 + 1e-12) + 1e-12:
        raise InvariantViolation(
            f"strips tour length {tour.length!r} exceeds certificate bound {cert.bound!r}"
        )
    return tour, cert


# ---------------------------------------------------------------------------
# exact solution


@lru_cache(maxsize=None)
def _layers(K: int):
    """Subset masks over K bits grouped by popcount, with predecessor tables."""
    masks = np.arange(1 << K, dtype=np.int64)
    pop = np.zeros(1 << K, dtype=np.int64)
    for j in range(K):
        pop += (masks >> j) & 1
    bits = np.int64(1) << np.arange(K, dtype=np.int64)
    out = []
    for m in range(2, K + 1):
        M = masks[pop == m]
        member = (M[:, None] & bits[None, :]) != 0
        prev = M[:, None] ^ bits[None, :]
        out.append((M, member, prev))
    return out


def _held_karp(D: np.ndarray) -> tuple[list[int], float]:
    n = len(D)
    K = n - 1
    full = (1 << K) - 1
    dp = np.full((1 << K, K), np.inf)
    parent = np.full((1 << K, K), -1, dtype=np.int8)
    dp[1 << np.arange(K), np.arange(K)] = D[0, 1:]
    inner = D[1:, 1:]  # inner[i, j]: cost of stepping from node i+1 to node j+1
    block = max(1, (1 << 22) // (K * K))
    for M, member, prev in _layers(K):
        for lo in range(0, len(M), block):
            Mb, mem, pv = M[lo:lo + block], member[lo:lo + block], prev[lo:lo + block]
            # cand[row, j, i] = dp[M ^ {j}, i] + inner[i, j]
            cand = dp[pv] + inner.T[None, :, :]
            best = np.argmin(cand, axis=2)
            val = np.take_along_axis(cand, best[..., None], axis=2)[..., 0]
            val = np.where(mem, val, np.inf)
            dp[Mb] = val
            parent[Mb] = np.where(mem, best, -1)
    closing = dp[full] + D[1:, 0]
    j = int(np.argmin(closing))
    length = float(closing[j])
    path = []
    mask = full
    while j >= 0:
        path.append(j + 1)
        pj = int(parent[mask, j])
        mask ^= 1 << j
        j = pj
    path.reverse()
    return [0] + path, length


def exact_tsp(points) -> Tour:
    """Minimum-length spanning cycle by bitmask dynamic programming.

    Supports up to ``EXACT_CAP`` points.  The order starts at node 0 and is
    oriented so that its second entry is smaller than its last.
    """
    pts = _as_points(points)
    n = len(pts)
    if n < 3:
        raise DegenerateInputError(f"exact_tsp needs at least 3 points, got {n}")
    if n > EXACT_CAP:
        raise CapabilityError(
            f"exact_tsp is capped at {EXACT_CAP} points (got {n}); use strips_tour instead"
        )
    if n == 3:
        order = [0, 1, 2]
    else:
        D = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
        order, _ = _held_karp(D)
    if order[1] > order[-1]:
        order = [order[0]] + order[1:][::-1]
    return Tour.from_order(pts, order)


def nn_lower_bound(points) -> float:
    """Sum over nodes of the distance to the nearest other node."""
    pts = _as_points(points)
    if len(pts) < 3:
        raise DegenerateInputError(f"nn_lower_bound needs at least 3 points, got {len(pts)}")
    dist, _ = cKDTree(pts).query(pts, k=2)
    return math.fsum(dist[:, 1])


# ---------------------------------------------------------------------------
# single-node insertion on the W grid


@dataclass(frozen=True, eq=False)
class Insertion:
    tour: Tour
    cost: float
    cell: Optional[str]  # "W1", "W2", or None when the fallback was used
    bound: float

    @property
    def in_cell(self) -> bool:
        return self.cell == "W1"

    @property
    def f_event(self) -> bool:
        """An edge with both ends in the 4Aw x 4Aw square existed."""
        return self.cell is not None


def insertion_scale(eps1: float) -> float:
    return (3.0 / eps1) ** (1.0 / 3.0)


def insertion_grid(n: int, eps1: float = 1.0) -> tuple[float, float]:
    """Return ``(w, A)`` with ``A = (3/eps1)^(1/3)`` and ``1/(2Aw)`` a whole number.

    ``w`` is the smallest value at least ``n^(-1/6)`` for which the grid
    divides the unit square; when even a single cell is too small for that,
    the one-cell grid ``w = 1/(2A)`` is used.
    """
    A = insertion_scale(eps1)
    cells = max(1, math.floor(n ** (1.0 / 6.0) / (2.0 * A)))
    return 1.0 / (2.0 * A * cells), A


def insert_node(points, tour: Tour, new_point, w: float, A: float) -> Insertion:
    """Insert ``new_point`` (index ``len(points)``) by splitting one tour edge.

    Let W1 be the 2Aw-cell of the grid holding the new point and W2 the
    concentric 4Aw square.  The shortest tour edge with both ends in W1 is
    split if one exists (cost at most 4Aw sqrt 2); otherwise the shortest
    edge with both ends in W2 (cost at most 6Aw sqrt 2); otherwise the
    cheapest edge anywhere, with ``cell=None``.
    """
    pts = _as_points(points)
    x = np.asarray(new_point, dtype=float).reshape(2)
    if np.any(x < -_CONTAIN_TOL) or np.any(x > 1 + _CONTAIN_TOL):
        raise ContainmentError("new point must lie in the unit square")
    q = 1.0 / (2.0 * A * w)
    g = int(round(q))
    if g < 1 or abs(q - g) > 1e-9 * max(1.0, q):
        raise ParameterError(f"1/(2Aw) = {q:.12g} must be a positive integer")
    cell = np.minimum(np.floor(x * g), g - 1) / g
    side = 1.0 / g

    order = np.asarray(tour.order, dtype=np.int64)
    u, v = order, np.roll(order, -1)
    pu, pv = pts[u], pts[v]

    def inside(p, lo, hi):
        return np.all((p >= lo - _CONTAIN_TOL) & (p <= hi + _CONTAIN_TOL), axis=1)

    in1 = inside(pu, cell, cell + side) & inside(pv, cell, cell + side)
    in2 = inside(pu, cell - side / 2, cell + 1.5 * side) & inside(pv, cell - side / 2, cell + 1.5 * side)
    elen = np.hypot(*(pu - pv).T)
    added = np.hypot(*(pu - x).T) + np.hypot(*(pv - x).T)
    if in1.any():
        tag, bound = "W1", 4 * A * w * math.sqrt(2)
        cand = np.flatnonzero(in1)
        pos = int(cand[np.argmin(elen[cand])])
    elif in2.any():
        tag, bound = "W2", 6 * A * w * math.sqrt(2)
        cand = np.flatnonzero(in2)
        pos = int(cand[np.argmin(elen[cand])])
    else:
        tag, bound = None, math.inf
        pos = int(np.argmin(added - elen))
    cost = float(added[pos] - elen[pos])
    new_order = np.insert(order, pos + 1, len(pts))
    new_tour = Tour.from_order(np.vstack([pts, x]), new_order)
    return Insertion(new_tour, cost, tag, bound)


# ---------------------------------------------------------------------------
# per-city cycles and merging


@dataclass
class CityCycle:
    nodes: np.ndarray  # cycle order, global node indices
    length: float
    method: str  # "exact", "strips", or "trivial" for fewer than 3 nodes


def city_cycles(instance, exact_threshold: int = 12, exact_only: bool = False) -> list[CityCycle]:
    """A spanning cycle for every selected city of ``instance``.

    Cities with at most ``exact_threshold`` nodes are solved exactly, larger
    ones with the strips construction (or ``PolicyError`` if ``exact_only``).
    """
    sel = instance.selection
    if sel is None:
        raise ParameterError("instance has no city structure")
    if exact_threshold > EXACT_CAP:
        raise PolicyError(f"exact threshold {exact_threshold} exceeds the solver cap {EXACT_CAP}")
    out = []
    origins = sel.origins
    for l in range(sel.N):
        idx = instance.city_nodes(l)
        pts = instance.nodes[idx]
        k = len(idx)
        if k < 3:
            out.append(CityCycle(idx, cycle_length(pts, np.arange(k)), "trivial"))
        elif k <= exact_threshold:
            t = exact_tsp(pts)
            out.append(CityCycle(idx[t.order], t.length, "exact"))
        elif exact_only:
            raise PolicyError(f"city {l} holds {k} nodes, above the exact threshold {exact_threshold}")
        else:
            t, _ = strips_tour(pts, origins[l], sel.r)
            out.append(CityCycle(idx[t.order], t.length, "strips"))
    return out


@dataclass
class MergeStep:
    city: int
    anchor: int  # city whose edge was removed, -1 when no adjacent city had one
    removed: tuple  # ((a, b), (x, y)): anchor edge, incoming edge
    cross: tuple  # ((a, x'), (y', b)) with their lengths as third entries
    length_after: float


@dataclass
class MergeTrace:
    order_of_merging: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    removed_edges: dict = field(default_factory=dict)
    initial_length: float = 0.0
    # max number of edges already removed from an anchor city's cycle at the moment it was used
    max_prior_removals: int = 0
    adjacent_only: bool = True

    @property
    def added_cross_edges(self) -> list:
        return [e for st in self.steps for e in st.cross]

    def step_increments(self) -> np.ndarray:
        lengths = [self.initial_length] + [st.length_after for st in self.steps]
        return np.diff(lengths)

    def removal_counts(self) -> dict:
        return {c: len(v) for c, v in self.removed_edges.items()}


def _bfs_merge_order(adj: list[list[int]], cities: list[int]) -> tuple[list[int], bool]:
    present = set(cities)
    order, seen, connected = [], set(), True
    for root in sorted(cities):
        if root in seen:
            continue
        if order:
            connected = False
        seen.add(root)
        queue = deque([root])
        while queue:
            c = queue.popleft()
            order.append(c)
            for nb in adj[c]:
                if nb in present and nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
    return order, connected


def merge_cycles(points, selection, cycles, strict: bool = True):
    """Join per-city cycles into one spanning cycle using cross edges.

    ``cycles[l]`` is the cycle order (global node indices, or a ``Tour`` /
    ``CityCycle``) for selection position ``l``.  Cities are merged in BFS
    order over the city lattice.  Each step removes one edge with both ends in
    an already-merged neighbouring city and one edge of the incoming cycle,
    picking the pair (and orientation) that adds the least length, and
    reconnects them with two cross edges.

    With ``strict=True`` every city needs a cycle of at least 8 nodes, which
    guarantees an unused edge in every anchor city.  ``strict=False`` accepts
    sparse or empty cities; if no neighbouring city has an intra-city edge
    left, the cheapest edge of the whole current tour is used and
    ``trace.adjacent_only`` is cleared.
    """
    pts = _as_points(points)
    N = selection.N
    if len(cycles) != N:
        raise ParameterError(f"expected {N} city cycles, got {len(cycles)}")
    orders = []
    for c in cycles:
        if isinstance(c, Tour):
            c = c.order
        elif isinstance(c, CityCycle):
            c = c.nodes
        orders.append(np.asarray(c, dtype=np.int64))
    if strict:
        small = [l for l, o in enumerate(orders) if len(o) < MERGE_MIN_NODES]
        if small:
            raise PreconditionError(
                f"cities {small} have cycles with fewer than {MERGE_MIN_NODES} nodes"
            )
    all_nodes = np.concatenate(orders) if orders else np.empty(0, dtype=np.int64)
    if len(np.unique(all_nodes)) != len(all_nodes):
        raise ParameterError("a node appears in more than one city cycle")
    present = [l for l in range(N) if len(orders[l]) > 0]
    if not present:
        raise DegenerateInputError("no city holds any node")

    adj = selection.adjacency()
    merge_order, connected = _bfs_merge_order(adj, present)
    if strict and not connected:
        raise ConnectivityError("city lattice graph is disconnected")

    owner = np.full(len(pts), -1, dtype=np.int64)
    for l in present:
        owner[orders[l]] = l
    succ = np.full(len(pts), -1, dtype=np.int64)

    def link(seq, a=None, b=None):
        for p, q in zip(seq[:-1], seq[1:]):
            succ[p] = q
        if a is None:
            succ[seq[-1]] = seq[0]
        else:
            succ[a] = seq[0]
            succ[seq[-1]] = b

    root = merge_order[0]
    link(list(orders[root]))
    # lengths are tracked for the union of all city cycles, so each step adds only its increment
    trace = MergeTrace(
        order_of_merging=[root], initial_length=math.fsum(cycle_length(pts, orders[l]) for l in present)
    )
    trace.removed_edges = {l: [] for l in present}
    merged = {root}
    merged_nodes = list(orders[root])
    total = trace.initial_length

    for city in merge_order[1:]:
        anchors = [q for q in adj[city] if q in merged]
        cand_a = [a for a in merged_nodes if owner[a] in anchors and owner[succ[a]] == owner[a]]
        if not cand_a:
            trace.adjacent_only = False
            cand_a = list(merged_nodes)
        A = np.array(sorted(cand_a), dtype=np.int64)
        Bn = succ[A]
        B = orders[city]
        k = len(B)
        X, Y = B, np.roll(B, -1)

        def d(p, q):
            diff = pts[p] - pts[q]
            return np.hypot(diff[..., 0], diff[..., 1])

        ab = d(A, Bn)[:, None]
        xy = d(X, Y)[None, :]
        opt1 = d(A[:, None], Y[None, :]) + d(X[None, :], Bn[:, None]) - ab - xy
        opt2 = d(A[:, None], X[None, :]) + d(Y[None, :], Bn[:, None]) - ab - xy
        scores = np.stack([opt1, opt2])
        opt, ia, jb = np.unravel_index(int(np.argmin(scores)), scores.shape)
        a, b = int(A[ia]), int(Bn[ia])
        if opt == 0:
            seq = [int(B[(jb + 1 + t) % k]) for t in range(k)]
        else:
            seq = [int(B[(jb - t) % k]) for t in range(k)]
        anchor = int(owner[a]) if owner[a] in anchors else -1
        if anchor >= 0:
            trace.max_prior_removals = max(trace.max_prior_removals, len(trace.removed_edges[anchor]))
        link(seq, a, b)
        x_in, y_in = int(X[jb]), int(Y[jb])
        if owner[a] == owner[b]:
            trace.removed_edges[int(owner[a])].append((a, b))
        trace.removed_edges[city].append((x_in, y_in))
        f1 = (a, seq[0], float(d(np.array([a]), np.array([seq[0]]))[0]))
        f2 = (seq[-1], b, float(d(np.array([seq[-1]]), np.array([b]))[0]))
        total += float(scores[opt, ia, jb])
        trace.steps.append(MergeStep(city, anchor, ((a, b), (x_in, y_in)), (f1, f2), total))
        trace.order_of_merging.append(city)
        merged.add(city)
        merged_nodes.extend(int(v) for v in B)

    start = int(orders[root][0])
    out = [start]
    nxt = int(succ[start])
    while nxt != start:
        out.append(nxt)
        nxt = int(succ[nxt])
    if len(out) != len(all_nodes):
        raise InvariantViolation("merged cycle does not span every node")
    if trace.adjacent_only and trace.max_prior_removals > 3:
        raise InvariantViolation(f"an anchor city had {trace.max_prior_removals} edges removed before reuse")
    tour = Tour.from_order(pts, out)
    if abs(tour.length - total) > 1e-9 * max(1.0, total):
        raise InvariantViolation(f"merge bookkeeping drifted: {total!r} vs tour length {tour.length!r}")
    return tour, trace


def city_cycle_lower_bound(instance, per_city_exact_lengths) -> float:
    """``V_n``: summed exact per-city cycle lengths, valid as a lower bound when ``s > r sqrt 2``.

    Cities with at most two nodes contribute zero.
    """
    sel = instance.selection
    if sel is None:
        raise ParameterError("instance has no city structure")
    if not sel.s > sel.r * math.sqrt(2.0):
        raise InapplicableError(
            f"the city-sum lower bound needs s > r*sqrt(2); got s={sel.s}, r*sqrt(2)={sel.r * math.sqrt(2.0)}"
        )
    lengths = list(per_city_exact_lengths)
    if len(lengths) != sel.N:
        raise ParameterError(f"expected {sel.N} per-city lengths, got {len(lengths)}")
    counts = instance.counts()
    return math.fsum(0.0 if counts[l] <= 2 else float(lengths[l]) for l in range(sel.N))
