"""Command-line front end: ``generate``, ``tour`` and ``experiment``.

Exit codes: 0 success, 2 usage or parameter error, 3 capability error
(for example an exact solve above the size cap), 4 invariant violation.
Every command writes a ``*.manifest.json`` next to its outputs.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import sys
from pathlib import Path

from . import __version__
from .errors import CapabilityError, DenseTSPError, InvariantViolation, ParameterError
from .experiments import (
    ExperimentConfig,
    aggregate,
    estimate_covariance_decay,
    estimate_nn_distance_scaling,
    run_city_trials,
    scaling_study,
    unconstrained_study,
)
from .geometry import DensityField, build_city_grid, sample_binomial, sample_poisson, select_well_connected
from .io import (
    csv_text,
    atomic_write,
    dumps,
    instance_to_dict,
    read_instance,
    svg_plot,
    tour_to_dict,
)
from .rng import stream
from .tours import MERGE_MIN_NODES, city_cycles, exact_tsp, merge_cycles, strips_tour

EXIT_OK, EXIT_USAGE, EXIT_CAPABILITY, EXIT_INVARIANT = 0, 2, 3, 4

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)

class _UsageError(Exception):
    pass

def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")

def _manifest(command: str, config: dict, seed, outputs: list, started: str) -> dict:
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "tool_version": __version__,
        "started": started,
        "finished": _now(),
        "outputs": [str(p) for p in outputs],
    }

def _manifest_path(out: Path) -> Path:
    return out.parent / (out.name + ".manifest.json") if not out.is_dir() else out / "manifest.json"

# ---------------------------------------------------------------------------
# generate

def cmd_generate(args) -> int:
    started = _now()
    if args.process == "binomial" and args.n == int(args.n):
        args.n = int(args.n)
    grid = build_city_grid(args.r, args.s)
    f = DensityField.parse(args.density)
    sel = select_well_connected(grid, args.N, stream(args.seed, "selection"))
    if args.process == "binomial":
        if not isinstance(args.n, int):
            raise ParameterError(f"binomial process needs an integer n, got {args.n}")
        inst = sample_binomial(sel, f, args.n, args.seed)
    else:
        inst = sample_poisson(sel, f, args.n, args.seed)
    out = Path(args.out)
    atomic_write(out, dumps(instance_to_dict(inst)))
    cfg = {k: getattr(args, k) for k in ("r", "s", "N", "n", "process", "density", "seed")}
    atomic_write(_manifest_path(out), dumps(_manifest("generate", cfg, args.seed, [out], started)))
    print(f"wrote {inst.size} nodes in {sel.N} cities to {out}")
    return EXIT_OK

# ---------------------------------------------------------------------------
# tour

def cmd_tour(args) -> int:
    started = _now()
    inst = read_instance(args.input)
    pts = inst.nodes
    if args.method == "strips":
        width = "auto" if args.strip_width is None else args.strip_width
        tour, cert = strips_tour(pts, (0.0, 0.0), 1.0, width)
        doc = tour_to_dict(tour, "strips", certificate=cert)
        msg = f"strips tour length {tour.length:.6f} <= certificate bound {cert.bound:.6f}"
    elif args.method == "exact":
        tour = exact_tsp(pts)
        doc = tour_to_dict(tour, "exact")
        msg = f"exact tour length {tour.length:.6f}"
    else:
        if inst.selection is None:
            raise ParameterError("merge needs an instance with city structure")
        cycles = city_cycles(inst)
        strict = min(inst.counts()) >= MERGE_MIN_NODES
        tour, trace = merge_cycles(pts, inst.selection, cycles, strict=strict)
        if not tour.is_permutation(inst.size):
            raise InvariantViolation("merged tour does not visit every node once", seed=inst.seed)
        extra = {
            "city_lengths": [c.length for c in cycles],
            "city_methods": [c.method for c in cycles],
            "merge_mode": "strict" if strict else "relaxed",
        }
        doc = tour_to_dict(tour, "merge", trace=trace, extra=extra)
        msg = f"merged tour length {tour.length:.6f} over {inst.selection.N} cities"
    out = Path(args.out)
    atomic_write(out, dumps(doc))
    cfg = {"in": str(args.input), "method": args.method, "strip_width": args.strip_width}
    atomic_write(_manifest_path(out), dumps(_manifest("tour", cfg, inst.seed, [out], started)))
    print(msg)
    return EXIT_OK

# ---------------------------------------------------------------------------
# experiment

def _run_study(cfg: ExperimentConfig):
    """Return ``(csv header, csv rows, summary dict, plot series, axis labels)``."""
    if cfg.study == "city_trials":
        recs = run_city_trials(cfg)
        header, rows = _trial_rows(recs)
        summary = {"aggregate": aggregate(recs).to_dict()}
        series = [("merged / b_n", [r.trial for r in recs], [r.merged_length / r.b_n for r in recs], None)]
        return header, rows, summary, series, ("trial", "merged / b_n")
    if cfg.study == "scaling":
        points, recs = scaling_study(cfg)
        header, rows = _trial_rows([r for group in recs for r in group])
        summary = {"points": [vars(p) for p in points]}
        xs = [p.n for p in points]
        series = [
            ("mean merged / b_n", xs, [p.merged_ratio for p in points], [3 * p.merged_ratio_se for p in points]),
            ("mean V_n / b_n", xs, [p.v_ratio for p in points], [3 * p.v_ratio_se for p in points]),
        ]
        return header, rows, summary, series, ("n", "mean ratio")
    if cfg.study == "nn_scaling":
        res = estimate_nn_distance_scaling(cfg.k_schedule, cfg.r, cfg.density, cfg.samples, cfg.seed)
        header = ["k", "mean_d", "se", "normalized"]
        summary = {"slope": res.slope, "band_ratio": res.band_ratio, "rows": res.rows}
        series = [("mean d", [r[0] for r in res.rows], [r[1] for r in res.rows], [3 * r[2] for r in res.rows])]
        return header, res.rows, summary, series, ("k", "mean NN distance")
    if cfg.study == "covariance":
        res = estimate_covariance_decay(cfg)
        header = ["n", "N", "trials", "cov", "cov_se", "corr", "corr_se", "normalized", "advisory"]
        rows = [[getattr(r, h) for h in header] for r in res]
        summary = {"rows": [vars(r) for r in res]}
        series = [("cov", [r.n / r.N ** 2 for r in res], [r.cov for r in res], [3 * r.cov_se for r in res])]
        return header, rows, summary, series, ("n / N^2", "cov(T_l1, T_l2)")
    res = unconstrained_study(cfg.n, cfg.trials, cfg.seed, cfg.density, cfg.exact_threshold)
    header = ["n", "trials", "exact_mean", "strips_mean", "nn_mean", "ceiling", "strips_max"]
    rows = [[getattr(r, h) for h in header] for r in res]
    summary = {"rows": [vars(r) for r in res]}
    xs = [r.n for r in res]
    series = [
        ("strips mean", xs, [r.strips_mean for r in res], None),
        ("nn bound mean", xs, [r.nn_mean for r in res], None),
        ("5 sqrt(n)", xs, [r.ceiling for r in res], None),
    ]
    return header, rows, summary, series, ("n", "length")

def _trial_rows(recs):
    header = ["trial_seed", "n", "N", "r", "s", "V_n", "merged", "b_n", "U_tot", "solver_mix",
              "upper_bound", "merge_mode", "V_n_over_b_n", "merged_over_b_n"]
    rows = [
        [r.seed, r.n, r.N, r.r, r.s, r.V_n, r.merged_length, r.b_n, r.U_tot, r.solver_mix,
         r.upper_bound, r.merge_mode, r.V_n / r.b_n, r.merged_length / r.b_n]
        for r in recs
    ]
    return header, rows

def cmd_experiment(args) -> int:
    started = _now()
    cfg = ExperimentConfig.from_text(Path(args.config).read_text(encoding="utf-8"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header, rows, summary, series, (xl, yl) = _run_study(cfg)
    outputs = [out / "results.csv", out / "summary.json"]
    atomic_write(outputs[0], csv_text(header, rows))
    atomic_write(outputs[1], dumps({"study": cfg.study, "config": cfg.resolved(), **summary}))
    if args.plot:
        outputs.append(out / "plot.svg")
        atomic_write(outputs[2], svg_plot(series, xl, yl, title=cfg.study))
    atomic_write(out / "manifest.json",
                 dumps(_manifest("experiment", cfg.resolved(), cfg.seed, outputs, started)))
    print(f"{cfg.study}: wrote {len(rows)} rows to {outputs[0]}")
    return EXIT_OK

# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="densetsp", description="Random TSP over dense cities.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="sample an instance")
    g.add_argument("--r", type=float, required=True, help="city side")
    g.add_argument("--s", type=float, required=True, help="gap between neighbouring cities")
    g.add_argument("--N", type=int, required=True, help="number of selected cities")
    g.add_argument("--n", type=float, required=True, help="node count (Poisson: mean)")
    g.add_argument("--process", choices=("binomial", "poisson"), default="binomial")
    g.add_argument("--density", default="uniform", help="uniform or checker:<ratio>")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("tour", help="build a tour for an instance file")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--method", choices=("strips", "exact", "merge"), required=True)
    t.add_argument("--strip-width", type=float, default=None)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_tour)

    e = sub.add_parser("experiment", help="run a Monte Carlo study from a config file")
    e.add_argument("--config", required=True)
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--plot", action="store_true", help="also write plot.svg")
    e.set_defaults(func=cmd_experiment)
    return p

def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc} (replay seed={exc.seed})", file=sys.stderr)
        return EXIT_INVARIANT
    except CapabilityError as exc:
        print(f"capability error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except (DenseTSPError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

if __name__ == "__main__":
    sys.exit(main())
