"""Acceptance suite: one test per criterion, each printed as PASS/FAIL in the terminal summary.

Run on its own with ``pytest tests/test_acceptance.py -v``; the
"acceptance criteria" section at the end lists every criterion with the
measured values.
"""

import itertools
import json
import math
import shutil
import time

import numpy as np
import pytest

from densetsp.cli import main
from densetsp.errors import InvariantViolation, ParameterError
from densetsp.experiments import (
    ExperimentConfig,
    estimate_covariance_decay,
    estimate_nn_distance_scaling,
    load_calibration,
    merge_step_bound,
    scaling_study,
)
from densetsp.geometry import (
    DensityField,
    Instance,
    build_city_grid,
    sample_unit_square,
    select_well_connected,
    snap_parameters,
)
from densetsp.io import dumps, instance_to_dict
from densetsp.probability import compare_binomial_poisson
from densetsp.rng import child_seed
from densetsp.tours import (
    city_cycles,
    cycle_length,
    exact_tsp,
    insert_node,
    insertion_grid,
    insertion_scale,
    merge_cycles,
    nn_lower_bound,
    strips_tour,
)

SEED = 20261016
criterion = pytest.mark.criterion


def brute_force_length(pts: np.ndarray) -> float:
    """Shortest cycle by enumerating every ordering with node 0 fixed."""
    D = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
    best = math.inf
    for perm in itertools.permutations(range(1, len(pts))):
        order = (0,) + perm
        best = min(best, math.fsum(D[order[i], order[(i + 1) % len(order)]] for i in range(len(order))))
    return best


def small_instances():
    rng = np.random.default_rng(SEED)
    return [rng.random((int(rng.integers(5, 9)), 2)) for _ in range(200)]


def fuzzed_points(rng, a: int, b: float) -> np.ndarray:
    """Uniform, clustered, strip-boundary and duplicated layouts inside ``[0, b]^2``."""
    kind = rng.integers(4)
    if kind == 0:
        return rng.random((a, 2)) * b
    if kind == 1:
        centre = rng.random(2) * b
        return np.clip(centre + rng.normal(0, b / 50, (a, 2)), 0, b)
    if kind == 2:
        k = max(1, round(math.sqrt(a)))
        xs = rng.integers(0, k + 1, a) * (b / k)
        return np.column_stack([xs, rng.random(a) * b])
    base = rng.random((max(1, a // 4), 2)) * b
    return base[rng.integers(0, len(base), a)]


def random_config(rng, N: int, need_gap: bool):
    """An admissible ``(r, s)`` and a connected selection of ``N`` cities."""
    while True:
        r = float(rng.uniform(0.04, 0.25))
        s0 = r * math.sqrt(2) * float(rng.uniform(1.02, 2.0)) if need_gap else float(rng.uniform(0.02, 0.3))
        try:
            r, s = snap_parameters(r, s0)
            grid = build_city_grid(r, s)
        except ParameterError:
            continue
        if grid.count >= N and (not need_gap or s > r * math.sqrt(2)):
            return r, s, select_well_connected(grid, N, rng)


def city_instance(rng, sel, counts) -> Instance:
    nodes = np.vstack([sel.origins[l] + rng.random((k, 2)) * sel.r for l, k in enumerate(counts)])
    city_of = np.repeat(np.arange(sel.N), counts)
    return Instance(nodes, city_of, "binomial", int(sum(counts)), 0, sel)


@criterion(1, "strips length <= certificate <= 5 b sqrt(a)")
def test_strips_bound(report):
    rng = np.random.default_rng(child_seed(SEED, "c1"))
    start, violations, total, worst = time.perf_counter(), 0, 10_000, 0.0
    for _ in range(total):
        a, b = int(rng.integers(3, 1001)), float(rng.choice([0.1, 1.0]))
        pts = fuzzed_points(rng, a, b)
        try:
            tour, cert = strips_tour(pts, (0.0, 0.0), b)
        except InvariantViolation:
            violations += 1
            continue
        ceiling = 5 * b * math.sqrt(a)
        worst = max(worst, tour.length / ceiling)
        violations += not (tour.length <= cert.bound <= ceiling)
    elapsed = time.perf_counter() - start
    report(f"{total} instances, {violations} violations, max length/ceiling {worst:.3f}, {elapsed:.1f}s")
    assert violations == 0 and elapsed < 60


@criterion(2, "exact solver equals brute force on 5-8 points")
def test_exact_matches_brute_force(report):
    start, worst = time.perf_counter(), 0.0
    for pts in small_instances():
        worst = max(worst, abs(exact_tsp(pts).length - brute_force_length(pts)))
    elapsed = time.perf_counter() - start
    report(f"200 instances, max |diff| {worst:.2e}, {elapsed:.1f}s")
    assert worst <= 1e-9 and elapsed < 30


@criterion(3, "deleting a point never lengthens the optimal tour")
def test_monotone_under_deletion(report):
    rng = np.random.default_rng(child_seed(SEED, "c3"))
    violations, min_gap = 0, math.inf
    for _ in range(100):
        pts = rng.random((9, 2))
        full = exact_tsp(pts).length
        for i in range(9):
            sub = exact_tsp(np.delete(pts, i, axis=0)).length
            min_gap = min(min_gap, full - sub)
            # 1e-12 absorbs rounding when a deleted point sits on a tour edge
            violations += sub > full + 1e-12
    report(f"900 deletions, {violations} violations, min decrease {min_gap:.3e}")
    assert violations == 0


@criterion(4, "V_n <= exact and merge overhead within 2(N-1)(s+8r)")
def test_sandwich(report):
    rng = np.random.default_rng(child_seed(SEED, "c4"))
    lower_violations = 0
    for _ in range(200):
        N = int(rng.integers(2, 4))
        r, s, sel = random_config(rng, N, need_gap=True)
        inst = city_instance(rng, sel, rng.integers(1, 6, N))
        v_n = math.fsum(c.length for c in city_cycles(inst, exact_threshold=5))
        total = inst.size
        optimal = exact_tsp(inst.nodes).length if total >= 3 else cycle_length(inst.nodes, np.arange(total))
        lower_violations += v_n > optimal + 1e-12

    upper_violations = edge_violations = cap_binding = 0
    worst = 0.0
    for _ in range(200):
        N = int(rng.integers(2, 7))
        r, s, sel = random_config(rng, N, need_gap=False)
        inst = city_instance(rng, sel, rng.integers(8, 17, N))
        cycles = city_cycles(inst)
        v_n = math.fsum(c.length for c in cycles)
        merged, trace = merge_cycles(inst.nodes, sel, cycles, strict=True)
        assert merged.is_permutation(inst.size)
        budget = (N - 1) * merge_step_bound(r, s)
        worst = max(worst, (merged.length - v_n) / budget)
        upper_violations += merged.length - v_n > budget + 1e-12
        edge_violations += sum(e[2] > s + 8 * r + 1e-12 for e in trace.added_cross_edges)
        cap_binding += trace.max_prior_removals == 3
    report(f"lower {lower_violations}, upper {upper_violations}, cross-edge {edge_violations} violations; "
           f"max overhead/budget {worst:.3f}, removal cap reached in {cap_binding} merges")
    assert lower_violations == upper_violations == edge_violations == 0


@criterion(5, "nearest-neighbour lower bound <= exact length")
def test_nn_lower_bound(report):
    violations, worst = 0, 0.0
    for pts in small_instances():
        nn, ex = nn_lower_bound(pts), exact_tsp(pts).length
        worst = max(worst, nn / ex)
        violations += nn > ex + 1e-12
    report(f"200 instances, {violations} violations, max nn/exact {worst:.3f}")
    assert violations == 0


@criterion(6, "strips length <= 5 sqrt(n) on the unit square")
def test_unit_square_ceiling(report):
    f = DensityField.uniform()
    violations, worst = 0, {}
    for n in (100, 400, 1600):
        worst[n] = 0.0
        for t in range(1000):
            inst = sample_unit_square(f, n, child_seed(SEED, "c6", n, t))
            length = strips_tour(inst.nodes)[0].length
            worst[n] = max(worst[n], length / (5 * math.sqrt(n)))
            violations += length > 5 * math.sqrt(n)
    report(f"3000 instances, {violations} violations, max length/ceiling "
           + ", ".join(f"n={n}: {w:.3f}" for n, w in worst.items()))
    assert violations == 0


@criterion(7, "nearest-neighbour distance exponent in [-0.57, -0.43], band <= 1.5")
def test_nn_distance_scaling(report):
    start = time.perf_counter()
    res = estimate_nn_distance_scaling([8, 16, 32, 64, 128], 0.08, "uniform", samples=10_000,
                                       seed=child_seed(SEED, "c7"))
    elapsed = time.perf_counter() - start
    report(f"slope {res.slope:.4f}, band {res.band_ratio:.3f}, {elapsed:.1f}s")
    assert -0.57 <= res.slope <= -0.43 and res.band_ratio <= 1.5 and elapsed < 120


@criterion(8, "Poisson per-city lengths uncorrelated within 3 SE")
def test_poisson_independence(report):
    cfg = ExperimentConfig(study="covariance", r=0.2, s=0.2, trials=2000, seed=child_seed(SEED, "c8"),
                           process="poisson", schedule=((40, 4),), pair=(0, 1), bootstrap=200)
    row = estimate_covariance_decay(cfg)[0]
    report(f"corr {row.corr:.4f}, SE {row.corr_se:.4f}")
    assert abs(row.corr) <= 3 * row.corr_se


@criterion(9, "pmf deviation at N=200 <= 0.75 x deviation at N=100, calibration locked")
def test_pmf_decay(report):
    cal = load_calibration()
    dev = {N: compare_binomial_poisson(10_000, N, 1 / N, 1.0, 1.0).max_rel_dev for N in (100, 200)}
    locked = all(dev[N] == pytest.approx(cal[f"pmf_max_rel_dev_n10000_N{N}"]["value"], rel=1e-12) for N in dev)
    report(f"dev100 {dev[100]:.5f}, dev200 {dev[200]:.5f}, ratio {dev[200] / dev[100]:.3f}, locked {locked}")
    assert dev[200] <= 0.5 * (1 + 0.5) * dev[100] and locked


@criterion(10, "in-cell insertion cost <= 4Aw sqrt(2)")
def test_insertion_bound(report):
    f, n = DensityField.uniform(), 500
    A = insertion_scale(f.eps1)
    w_default, _ = insertion_grid(n, f.eps1)
    grids = {"default": w_default, "g4": 1 / (2 * A * 4), "g8": 1 / (2 * A * 8)}
    stats, violations = {}, 0
    for name, w in grids.items():
        calls = fallback = in_cell = 0
        for t in range(500):
            inst = sample_unit_square(f, n, child_seed(SEED, "c10", t))
            base = strips_tour(inst.nodes[:-1])[0]
            ins = insert_node(inst.nodes[:-1], base, inst.nodes[-1], w, A)
            calls += 1
            fallback += ins.cell is None
            in_cell += ins.cell == "W1"
            if ins.cell == "W1":
                violations += ins.cost > 4 * A * w * math.sqrt(2) + 1e-12
            elif ins.cell == "W2":
                violations += ins.cost > ins.bound + 1e-12
        stats[name] = (in_cell / calls, fallback / calls)
    report(f"{violations} violations; W1 / fallback rate "
           + ", ".join(f"{k}: {a:.3f} / {b:.3f}" for k, (a, b) in stats.items()))
    assert violations == 0


@criterion(11, "CV of merged/b_n decreases along the schedule")
def test_concentration_shape(report):
    start = time.perf_counter()
    cfg = ExperimentConfig(study="scaling", r=0.08, s=0.15, M=0.05, trials=500, seed=child_seed(SEED, "c11"),
                           schedule=((64, 4), (128, 8), (256, 16)), bootstrap=200)
    rows, _ = scaling_study(cfg)
    elapsed = time.perf_counter() - start
    ok = all(b.cv <= a.cv + b.cv_se for a, b in zip(rows, rows[1:]))
    report("CV " + ", ".join(f"({r.n},{r.N}): {r.cv:.4f}+-{r.cv_se:.4f}" for r in rows) + f", {elapsed:.1f}s")
    assert ok and elapsed < 600


def _run_all_commands(work):
    """Every CLI command once; returns the written files as bytes, manifests without timestamps."""
    if work.exists():
        shutil.rmtree(work)
    work.mkdir()
    inst = work / "inst.json"
    unit = work / "unit.json"
    unit.write_text(dumps(instance_to_dict(sample_unit_square(DensityField.uniform(), 12, 5))))
    codes = [
        main(["generate", "--r", "0.2", "--s", "0.2", "--N", "4", "--n", "40", "--seed", "7", "--out", str(inst)]),
        main(["generate", "--r", "0.2", "--s", "0.2", "--N", "3", "--n", "30", "--process", "poisson",
              "--density", "checker:2", "--seed", "7", "--out", str(work / "poi.json")]),
        main(["tour", "--in", str(inst), "--method", "strips", "--out", str(work / "strips.json")]),
        main(["tour", "--in", str(inst), "--method", "merge", "--out", str(work / "merge.json")]),
        main(["tour", "--in", str(unit), "--method", "exact", "--out", str(work / "exact.json")]),
    ]
    for study in ("city_trials", "scaling", "covariance", "nn_scaling", "unconstrained"):
        cfg = work / f"{study}.cfg"
        cfg.write_text(f"study = {study}\nr = 0.08\ns = 0.15\nM = 0.05\nN = 4\nn = 40\ntrials = 20\nseed = 3\n"
                       "schedule = 64:4,128:8\nk_schedule = 8,16\nsamples = 1000\nbootstrap = 20\n")
        codes.append(main(["experiment", "--config", str(cfg), "--out", str(work / study), "--plot"]))
    files = {}
    for path in sorted(work.rglob("*")):
        if path.is_file():
            data = path.read_bytes()
            if path.name.endswith("manifest.json"):
                doc = json.loads(data)
                doc.pop("started"), doc.pop("finished")
                data = dumps(doc).encode()
            files[str(path.relative_to(work))] = data
    return codes, files


@criterion(12, "byte-identical outputs on reruns of every CLI command")
def test_cli_determinism(report, tmp_path):
    codes1, first = _run_all_commands(tmp_path / "work")
    codes2, second = _run_all_commands(tmp_path / "work")
    differing = sorted(k for k in first.keys() | second.keys() if first.get(k) != second.get(k))
    report(f"{len(first)} files compared, {len(differing)} differ, exit codes {sorted(set(codes1 + codes2))}")
    assert codes1 == codes2 and set(codes1) == {0} and not differing


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
