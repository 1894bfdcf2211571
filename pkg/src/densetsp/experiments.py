"""Seeded Monte Carlo studies over the dense-cities model.

Every study is a pure function of its configuration: trial ``t`` draws from
streams keyed by ``child_seed(seed, "trial", t)``, so records can be
regenerated one at a time for replay and do not depend on execution order.
Hard invariants (spanning tours, the sandwich ``V_n <= merged``, per-step
merge increments) are checked in every trial and raise
:class:`InvariantViolation` carrying the trial seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .errors import InvariantViolation, ParameterError, PolicyError, RegimeError
from .geometry import (
    CitySelection,
    DensityField,
    build_city_grid,
    rejection_sample,
    sample_binomial,
    sample_poisson,
    sample_unit_square,
    select_well_connected,
)
from .rng import child_seed, stream
from .tours import (
    EXACT_CAP,
    MERGE_MIN_NODES,
    city_cycles,
    cycle_length,
    exact_tsp,
    merge_cycles,
    nn_lower_bound,
    strips_tour,
)

STUDIES = ("city_trials", "nn_scaling", "covariance", "scaling", "unconstrained")
_TOL = 1e-9


# ---------------------------------------------------------------------------
# configuration


def _ints(v) -> tuple:
    if isinstance(v, (int, np.integer)):
        return (int(v),)
    return tuple(int(x) for x in v)


def _pairs(v) -> tuple:
    """``"64:4,128:8"`` or a sequence of pairs -> ``((64, 4), (128, 8))``."""
    if isinstance(v, str):
        out = []
        for item in v.split(","):
            a, _, b = item.strip().partition(":")
            if not b:
                raise ParameterError(f"schedule entries must look like n:N, got {item!r}")
            out.append((int(a), int(b)))
        return tuple(out)
    return tuple((int(a), int(b)) for a, b in v)


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one study.

    The text form is one ``key = value`` per line; ``#`` starts a comment.
    Lists are comma separated and schedules of ``(n, N)`` pairs are written
    ``n:N,n:N``.  Unknown keys are rejected.
    """

    study: str = "city_trials"
    r: float = 0.2
    s: float = 0.2
    N: int = 4
    n: tuple = (32,)
    density: str = "uniform"
    process: str = "binomial"
    trials: int = 100
    seed: int = 0
    M: Optional[float] = None  # enables the r^2 >= M ln(n)/n regime check when set
    exact_threshold: int = 12
    exact_only: bool = False
    k_schedule: tuple = (8, 16, 32, 64, 128)
    samples: int = 10_000
    pair: tuple = (0, 1)
    schedule: tuple = ()
    bootstrap: int = 200
    inject_fault: int = -1  # test hook: corrupt the merged tour of this trial index

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("n", _ints(self.n))
        set_("k_schedule", _ints(self.k_schedule))
        set_("pair", _ints(self.pair))
        set_("schedule", _pairs(self.schedule))
        if self.study not in STUDIES:
            raise ParameterError(f"unknown study {self.study!r}; expected one of {', '.join(STUDIES)}")
        if self.process not in ("binomial", "poisson"):
            raise ParameterError(f"process must be binomial or poisson, got {self.process!r}")
        if self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.seed < 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if len(self.pair) != 2:
            raise ParameterError(f"pair needs exactly two city positions, got {self.pair}")
        if self.exact_threshold > EXACT_CAP:
            raise PolicyError(f"exact threshold {self.exact_threshold} exceeds the solver cap {EXACT_CAP}")
        DensityField.parse(self.density)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = (p.strip() for p in line.partition("="))
            if not eq:
                raise ParameterError(f"line {lineno}: expected key = value, got {raw!r}")
            if key not in known:
                raise ParameterError(f"line {lineno}: unknown key {key!r}")
            if key in kw:
                raise ParameterError(f"line {lineno}: duplicate key {key!r}")
            kw[key] = _parse_value(key, value, lineno)
        return cls(**kw)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name == "schedule":
                v = ",".join(f"{a}:{b}" for a, b in v)
            elif isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def resolved(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = [list(x) if isinstance(x, tuple) else x for x in v]
        return d


_FLOAT_KEYS = {"r", "s", "M"}
_INT_KEYS = {"N", "trials", "seed", "exact_threshold", "samples", "bootstrap", "inject_fault"}
_LIST_KEYS = {"n", "k_schedule", "pair"}


def _parse_value(key, value, lineno):
    try:
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _INT_KEYS:
            return int(value)
        if key in _LIST_KEYS:
            return tuple(int(x) for x in value.split(","))
        if key == "exact_only":
            if value.lower() not in ("true", "false"):
                raise ValueError(value)
            return value.lower() == "true"
    except ValueError:
        raise ParameterError(f"line {lineno}: bad value {value!r} for {key}") from None
    return value


def check_regime(n: int, r: float, s: float, M: Optional[float], need_lower: bool = True) -> None:
    """Raise :class:`RegimeError` naming the failed inequality."""
    if M is not None and not r * r >= M * math.log(n) / n:
        raise RegimeError(
            f"regime check failed: r^2 >= M ln(n)/n needs {r * r:.6g} >= {M * math.log(n) / n:.6g} (n={n}, M={M})"
        )
    if need_lower and not s > r * math.sqrt(2.0):
        raise RegimeError(f"regime check failed: s > r*sqrt(2) needs {s:.6g} > {r * math.sqrt(2.0):.6g}")


def draw_selection(r: float, s: float, N: int, seed: int, *index: int) -> CitySelection:
    grid = build_city_grid(r, s)
    return select_well_connected(grid, N, stream(seed, "selection", *index))


# ---------------------------------------------------------------------------
# per-trial records


@dataclass
class TrialRecord:
    trial: int
    seed: int
    n: float
    N: int
    r: float
    s: float
    counts: list  # N_l
    T: list  # per-city cycle lengths
    methods: list  # solver used per city
    V_n: float
    merged_length: float
    upper_bound: float  # V_n + 2(N-1)(s+8r) when U_tot holds, else 5 sqrt(n)
    U: list  # per-city U_l indicators
    U_tot: bool
    b_n: float
    merge_mode: str  # "strict" when every city had >= 8 nodes, else "relaxed"
    adjacent_only: bool
    max_step_increment: float
    max_cross_edge: float

    @property
    def upper_slack(self) -> float:
        return self.merged_length - self.V_n

    @property
    def solver_mix(self) -> str:
        kinds = ("exact", "strips", "trivial")
        return ";".join(f"{k}:{self.methods.count(k)}" for k in kinds)

    @property
    def all_exact(self) -> bool:
        return all(m != "strips" for m in self.methods)


def count_band(n: float, N: int, eta1: float, eta2: float) -> tuple[float, float]:
    """Per-city count window ``[eta1 n / 2N, 2 eta2 n / N]`` defining ``U_l``."""
    return eta1 * n / (2 * N), 2 * eta2 * n / N


def merge_step_bound(r: float, s: float) -> float:
    return 2.0 * (s + 8.0 * r)


def simulate_trial(config: ExperimentConfig, selection: CitySelection, f: DensityField,
                   n: int, trial: int, seed_index: tuple = ()) -> TrialRecord:
    """Sample one instance, solve every city, merge, and check the hard invariants."""
    tseed = child_seed(config.seed, "trial", *seed_index, trial)
    if config.process == "binomial":
        inst = sample_binomial(selection, f, n, tseed)
    else:
        inst = sample_poisson(selection, f, float(n), tseed)
    cycles = city_cycles(inst, config.exact_threshold, config.exact_only)
    T = [c.length for c in cycles]
    counts = [int(c) for c in inst.counts()]
    V_n = math.fsum(T)
    N, r, s = selection.N, selection.r, selection.s

    strict = min(counts) >= MERGE_MIN_NODES
    if inst.size == 0:
        merged_len, adjacent_only, trace = 0.0, True, None
    else:
        tour, trace = merge_cycles(inst.nodes, selection, cycles, strict=strict)
        order = np.asarray(tour.order)
        if trial == config.inject_fault:
            order = order[:-1]
        if len(order) != inst.size or len(np.unique(order)) != inst.size:
            raise InvariantViolation(f"merged tour of trial {trial} does not visit every node once", seed=tseed)
        merged_len = tour.length
        adjacent_only = trace.adjacent_only

    lo, hi = count_band(n, N, f.eta1, f.eta2)
    U = [bool(lo <= c <= hi) for c in counts]
    U_tot = all(U)
    bound = merge_step_bound(r, s)
    steps = [] if trace is None else trace.steps
    incs = [] if trace is None else list(trace.step_increments())
    max_inc = max(incs, default=0.0)
    max_cross = max((e[2] for st in steps for e in st.cross), default=0.0)

    for st, inc in zip(steps, incs):
        if st.anchor < 0:
            continue
        if inc > bound + _TOL or max(e[2] for e in st.cross) > s + 8 * r + _TOL:
            raise InvariantViolation(
                f"merge step into city {st.city} added {inc:.12g} > 2(s+8r) = {bound:.12g}", seed=tseed
            )
    if s > r * math.sqrt(2.0) and adjacent_only and V_n > merged_len + _TOL:
        raise InvariantViolation(f"V_n = {V_n:.17g} exceeds merged length {merged_len:.17g}", seed=tseed)

    upper = V_n + (N - 1) * bound if U_tot else 5.0 * math.sqrt(n)
    return TrialRecord(
        trial=trial, seed=tseed, n=n, N=N, r=r, s=s, counts=counts, T=T,
        methods=[c.method for c in cycles], V_n=V_n, merged_length=merged_len,
        upper_bound=upper, U=U, U_tot=U_tot, b_n=r * math.sqrt(n * N),
        merge_mode="strict" if strict else "relaxed", adjacent_only=adjacent_only,
        max_step_increment=float(max_inc), max_cross_edge=float(max_cross),
    )


def run_city_trials(config: ExperimentConfig, n: Optional[int] = None,
                    selection: Optional[CitySelection] = None) -> list[TrialRecord]:
    """``config.trials`` independent trials on one well-connected city selection.

    Cities with at most ``exact_threshold`` nodes are solved exactly, larger
    ones with strips (``PolicyError`` instead when ``exact_only``).
    """
    n = int(config.n[0] if n is None else n)
    if config.M is not None:
        check_regime(n, config.r, config.s, config.M, need_lower=False)
    f = DensityField.parse(config.density)
    if selection is None:
        selection = draw_selection(config.r, config.s, config.N, config.seed)
    return [simulate_trial(config, selection, f, n, t) for t in range(config.trials)]


# ---------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class Stat:
    mean: float
    variance: float
    se: float
    count: int


@dataclass
class SummaryStats:
    stats: dict
    T_covariance: Optional[np.ndarray] = None  # N x N sample covariance of per-city lengths

    def __getitem__(self, key) -> Stat:
        return self.stats[key]

    def to_dict(self) -> dict:
        out = {k: asdict(v) for k, v in self.stats.items()}
        if self.T_covariance is not None:
            out["T_covariance"] = self.T_covariance.tolist()
        return out


def summarize(values) -> Stat:
    """Mean, sample variance and standard error with exactly rounded sums.

    Because ``math.fsum`` is exactly rounded, the result does not depend on
    the order of ``values``.
    """
    x = [float(v) for v in values]
    if not x:
        raise ParameterError("cannot summarize an empty sample")
    k = len(x)
    mean = math.fsum(x) / k
    var = math.fsum((v - mean) ** 2 for v in x) / (k - 1) if k > 1 else 0.0
    return Stat(mean, var, math.sqrt(var / k), k)


def sample_cov(x, y) -> float:
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if len(x) != len(y) or len(x) < 2:
        raise ParameterError("covariance needs two equally long samples of size >= 2")
    mx, my = math.fsum(x) / len(x), math.fsum(y) / len(y)
    return math.fsum((a - mx) * (b - my) for a, b in zip(x, y)) / (len(x) - 1)


TRACKED = ("V_n", "merged_length", "upper_slack", "V_n_over_b_n", "merged_over_b_n", "U_tot")


def aggregate(records: Sequence[TrialRecord]) -> SummaryStats:
    if not records:
        raise ParameterError("aggregate needs at least one record")
    cols = {
        "V_n": [r.V_n for r in records],
        "merged_length": [r.merged_length for r in records],
        "upper_slack": [r.upper_slack for r in records],
        "V_n_over_b_n": [r.V_n / r.b_n for r in records],
        "merged_over_b_n": [r.merged_length / r.b_n for r in records],
        "U_tot": [float(r.U_tot) for r in records],
    }
    stats = {k: summarize(v) for k, v in cols.items()}
    cov = None
    Ns = {r.N for r in records}
    if len(records) > 1 and len(Ns) == 1:
        N = Ns.pop()
        T = [[r.T[l] for r in records] for l in range(N)]
        cov = np.array([[sample_cov(T[i], T[j]) for j in range(N)] for i in range(N)])
    return SummaryStats(stats, cov)


def bootstrap_se(stat, columns: Sequence[np.ndarray], reps: int, seed: int, purpose: str = "bootstrap") -> float:
    """Standard deviation of ``stat`` over ``reps`` paired resamples of ``columns``."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    k = len(cols[0])
    rng = stream(seed, purpose)
    vals = []
    for _ in range(reps):
        idx = rng.integers(k, size=k)
        vals.append(stat(*(c[idx] for c in cols)))
    return float(np.std(vals, ddof=1))


def _cv(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / np.mean(x))


# ---------------------------------------------------------------------------
# nearest-neighbour distances inside one city


@dataclass
class NNScaling:
    rows: list  # (k, mean_d, se, mean_d * sqrt(k) / r)
    slope: float

    @property
    def band_ratio(self) -> float:
        norm = [row[3] for row in self.rows]
        return max(norm) / min(norm)


def estimate_nn_distance_scaling(k_schedule, r: float, f_spec: str = "uniform",
                                 samples: int = 10_000, seed: int = 0,
                                 origin=(0.0, 0.0)) -> NNScaling:
    """Mean distance from the k-th of k i.i.d. city points to the nearest of the other k-1.

    Points follow the density restricted to the ``r x r`` square at
    ``origin``.  The slope is the least-squares fit of ``ln mean_d`` on ``ln k``.
    """
    ks = _ints(k_schedule)
    if min(ks) < 2:
        raise ParameterError("every k must be at least 2")
    if samples < 1000:
        raise ParameterError(f"need at least 1000 samples, got {samples}")
    f = DensityField.parse(f_spec)
    rows = []
    for k in ks:
        pts, _, _ = rejection_sample(np.array([origin]), r, f, samples * k, stream(seed, "nn", k))
        P = pts.reshape(samples, k, 2)
        diff = P[:, :-1, :] - P[:, -1:, :]
        d = np.sqrt((diff ** 2).sum(axis=2)).min(axis=1)
        st = summarize(d)
        rows.append((k, st.mean, st.se, st.mean * math.sqrt(k) / r))
    if len(set(ks)) < 2:
        return NNScaling(rows, math.nan)
    slope = float(np.polyfit(np.log(ks), np.log([row[1] for row in rows]), 1)[0])
    return NNScaling(rows, slope)


# ---------------------------------------------------------------------------
# covariance between two cities


@dataclass
class CovarianceRow:
    n: int
    N: int
    trials: int
    cov: float
    cov_se: float
    corr: float
    corr_se: float
    normalized: float  # |cov| / (r^2 n^2 / N^3)
    advisory: bool  # fewer than 1000 trials


def _city_length(inst, l: int, threshold: int) -> float:
    idx = inst.city_nodes(l)
    k = len(idx)
    pts = inst.nodes[idx]
    if k < 3:
        return cycle_length(pts, np.arange(k))
    if k <= threshold:
        return exact_tsp(pts).length
    sel = inst.selection
    return strips_tour(pts, sel.origins[l], sel.r)[0].length


def estimate_covariance_decay(config: ExperimentConfig, schedule=None) -> list[CovarianceRow]:
    """Sample covariance of ``(T_l1, T_l2)`` at every ``(n, N)`` of the schedule.

    ``config.pair`` gives the two selection positions and ``config.process``
    the node process.  Standard errors come from a paired bootstrap.
    """
    l1, l2 = config.pair
    if l1 == l2:
        raise ParameterError("covariance needs two distinct cities")
    schedule = _pairs(schedule) if schedule is not None else config.schedule or ((config.n[0], config.N),)
    f = DensityField.parse(config.density)
    rows = []
    for i, (n, N) in enumerate(schedule):
        if not (0 <= l1 < N and 0 <= l2 < N):
            raise ParameterError(f"pair {config.pair} is not inside a selection of {N} cities")
        sel = draw_selection(config.r, config.s, N, config.seed, i)
        a, b = np.empty(config.trials), np.empty(config.trials)
        for t in range(config.trials):
            tseed = child_seed(config.seed, "trial", i, t)
            if config.process == "binomial":
                inst = sample_binomial(sel, f, n, tseed)
            else:
                inst = sample_poisson(sel, f, float(n), tseed)
            a[t] = _city_length(inst, l1, config.exact_threshold)
            b[t] = _city_length(inst, l2, config.exact_threshold)
        cov = sample_cov(a, b)
        corr = float(np.corrcoef(a, b)[0, 1])
        bseed = child_seed(config.seed, "bootstrap", i)
        cov_se = bootstrap_se(lambda x, y: np.cov(x, y)[0, 1], [a, b], config.bootstrap, bseed)
        corr_se = bootstrap_se(lambda x, y: np.corrcoef(x, y)[0, 1], [a, b], config.bootstrap, bseed)
        scale = config.r ** 2 * n * n / N ** 3
        rows.append(CovarianceRow(n, N, config.trials, cov, cov_se, corr, corr_se,
                                  abs(cov) / scale, config.trials < 1000))
    return rows


# ---------------------------------------------------------------------------
# scaling along an (n, N) schedule


@dataclass
class ScalingRow:
    n: int
    N: int
    b_n: float
    v_ratio: float
    v_ratio_se: float
    merged_ratio: float
    merged_ratio_se: float
    cv: float
    cv_se: float
    p_upper: float  # fraction of trials with merged <= theta5 * b_n
    theta5: float
    u_tot_rate: float
    relaxed_rate: float


def scaling_study(config: ExperimentConfig, schedule=None, theta_factor: float = 1.2):
    """Mean ``V_n / b_n`` and ``merged / b_n`` with the CV of the latter along a schedule.

    Returns ``(rows, records)`` where ``records[i]`` lists the trials at
    schedule point ``i``.
    """
    schedule = _pairs(schedule) if schedule is not None else config.schedule
    if not schedule:
        raise ParameterError("scaling study needs a schedule of n:N pairs")
    for n, _ in schedule:
        check_regime(n, config.r, config.s, config.M, need_lower=True)
    f = DensityField.parse(config.density)
    rows, all_records = [], []
    for i, (n, N) in enumerate(schedule):
        sel = draw_selection(config.r, config.s, N, config.seed, i)
        recs = [simulate_trial(config, sel, f, n, t, (i,)) for t in range(config.trials)]
        all_records.append(recs)
        b_n = recs[0].b_n
        v = summarize(r.V_n / b_n for r in recs)
        m = np.array([r.merged_length / b_n for r in recs])
        ms = summarize(m)
        theta5 = theta_factor * ms.mean
        cv_se = (bootstrap_se(_cv, [m], config.bootstrap, child_seed(config.seed, "bootstrap", i))
                 if len(m) > 2 else math.nan)
        rows.append(ScalingRow(
            n, N, b_n, v.mean, v.se, ms.mean, ms.se, _cv(m) if len(m) > 1 else 0.0, cv_se,
            float(np.mean(m <= theta5)), theta5,
            float(np.mean([r.U_tot for r in recs])),
            float(np.mean([r.merge_mode == "relaxed" for r in recs])),
        ))
    return rows, all_records


# ---------------------------------------------------------------------------
# unit square without cities


@dataclass
class UnconstrainedRow:
    n: int
    trials: int
    exact_mean: float  # nan above the exact cap
    strips_mean: float
    nn_mean: float
    ceiling: float  # 5 sqrt(n)
    strips_max: float


def unconstrained_study(n_schedule, trials: int, seed: int = 0, density: str = "uniform",
                        exact_max: int = 12) -> list[UnconstrainedRow]:
    """Strips length, NN lower bound and (for small n) exact length on the unit square.

    Checks ``strips <= 5 sqrt(n)`` and ``nn <= exact <= strips`` in every trial.
    """
    f = DensityField.parse(density)
    rows = []
    for n in _ints(n_schedule):
        if n > 2000:
            raise ParameterError(f"n={n} is above the supported 2000")
        ex, st, nn = [], [], []
        for t in range(trials):
            tseed = child_seed(seed, "trial", n, t)
            pts = sample_unit_square(f, n, tseed).nodes
            s_len = strips_tour(pts)[0].length
            lb = nn_lower_bound(pts)
            if s_len > 5.0 * math.sqrt(n) + _TOL:
                raise InvariantViolation(f"strips length {s_len} exceeds 5 sqrt(n)", seed=tseed)
            if n <= exact_max:
                e_len = exact_tsp(pts).length
                if not (lb <= e_len + _TOL and e_len <= s_len + _TOL):
                    raise InvariantViolation(f"nn <= exact <= strips fails: {lb}, {e_len}, {s_len}", seed=tseed)
                ex.append(e_len)
            elif lb > s_len + _TOL:
                raise InvariantViolation(f"nn bound {lb} exceeds strips {s_len}", seed=tseed)
            st.append(s_len)
            nn.append(lb)
        rows.append(UnconstrainedRow(
            n, trials, summarize(ex).mean if ex else math.nan, summarize(st).mean,
            summarize(nn).mean, 5.0 * math.sqrt(n), max(st),
        ))
    return rows


# ---------------------------------------------------------------------------
# locked calibration constants


def load_calibration() -> dict:
    """Calibrated constants shipped with the package, keyed by name."""
    text = resources.files("densetsp").joinpath("calibration.json").read_text()
    return {c["name"]: c for c in json.loads(text)["constants"]}


def calibrate(seed: int = 20261016, trials: int = 500) -> list[dict]:
    """Recompute every locked constant.

    Deterministic pmf values are stored as measured; Monte Carlo constants
    are stored with the margin noted in their ``note`` field.
    """
    from .probability import compare_binomial_poisson

    out = []

    def put(name, value, note):
        out.append({"name": name, "value": float(value), "seed": seed, "note": note})

    pmf = {N: compare_binomial_poisson(10_000, N, 1.0 / N, 1.0, 1.0) for N in (100, 200, 400)}
    for N, c in pmf.items():
        put(f"pmf_max_rel_dev_n10000_N{N}", c.max_rel_dev, "direct evaluation, eta1 = eta2 = 1, p = 1/N")
    put("pmf_normalized_constant", 1.1 * max(c.normalized for c in pmf.values()),
        "1.1 x largest max_rel_dev / (n/N^2) over N in {100, 200, 400}")

    # P(U_l) >= 1 - exp(-delta4 n/N): largest delta4 consistent with every point
    deltas = []
    for n in (32, 64, 128):
        cfg = ExperimentConfig(r=0.2, s=0.2, N=4, n=n, trials=trials, seed=seed)
        recs = run_city_trials(cfg)
        hits = [u for r in recs for u in r.U]
        miss = max(1.0 - float(np.mean(hits)), 0.5 / len(hits))
        deltas.append(-math.log(miss) / (n / 4))
    put("delta4_hat", 0.5 * min(deltas), "half the smallest fitted value over n/N in {8, 16, 32}")

    cfg = ExperimentConfig(study="covariance", r=0.2, s=0.2, trials=1000, seed=seed, pair=(0, 1),
                           bootstrap=100, schedule=((40, 4),))
    row = estimate_covariance_decay(cfg)[0]
    put("covariance_normalized_constant", max((abs(row.cov) + 3 * row.cov_se) / (0.04 * 40 ** 2 / 4 ** 3), 1e-3),
        "(|cov| + 3 SE) / (r^2 n^2 / N^3) for binomial n=40, N=4, r=0.2")

    scfg = ExperimentConfig(study="scaling", r=0.08, s=0.15, M=0.05, trials=trials, seed=seed,
                            schedule=((64, 4), (128, 8), (256, 16)))
    rows, _ = scaling_study(scfg)
    put("v_ratio_low", 0.1, "lower edge of the V_n/b_n band; every observed mean lies well inside")
    put("v_ratio_high", 3.0, "upper edge of the V_n/b_n band")
    put("v_ratio_observed_min", min(r.v_ratio for r in rows), "smallest mean V_n/b_n on the scaling schedule")
    put("v_ratio_observed_max", max(r.v_ratio for r in rows), "largest mean V_n/b_n on the scaling schedule")
    put("theta5_factor", 1.2, "theta5 = factor x observed mean merged/b_n")
    return out
