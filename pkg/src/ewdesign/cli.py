"""Command-line front end: ``ewdesign design|round|verify|efficiency``.

Exit codes: 0 success (or verification passed), 1 invalid input,
2 numerical failure, 3 verification failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .core import ExactDesign
from .errors import (AllDrawsInfeasible, AllPointsDropped, ConfigError, DegenerateProfile, DimensionMismatch,
                     InfeasibleParameters, MaxIterExceeded, ReferenceSingular, SingularMatrix, SingularStart)
from .evaluate import (LocalOptimumCache, efficiency_from_dets, frequency_bins, robustness_study,
                       verify_design)
from .expectation import ExpectedInfo
from .forlion import forlion_run
from .io import atomic_write_text, fmt, read_design, read_thetas, rows_to_csv, write_design, write_json, write_jsonl
from .rounding import RoundingConfig, round_design

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_VERIFY_FAIL = 0, 1, 2, 3

NUMERICAL_ERRORS = (SingularMatrix, SingularStart, MaxIterExceeded, AllPointsDropped, ReferenceSingular,
                    AllDrawsInfeasible, InfeasibleParameters, DegenerateProfile)

log = logging.getLogger("ewdesign")


def _setup(args) -> tuple[ExperimentConfig, Path]:
    cfg = load_config(args.config)
    fl = dataclasses.replace(cfg.forlion, threads=args.threads or (os.cpu_count() or 1))
    if args.seed is not None:
        fl = dataclasses.replace(fl, seed=args.seed)
        cfg.seed = args.seed
    cfg.forlion = fl
    out = Path(args.out) if args.out else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _evaluator(cfg: ExperimentConfig) -> ExpectedInfo:
    return ExpectedInfo(cfg.model, cfg.ensemble())


def _verify_record(rep, names) -> dict:
    return {"d_max": float(rep.d_max), "p": rep.p, "tol": rep.tol, "pass": bool(rep.passed),
            "grid_points": rep.grid_points,
            "argmax": {n: float(v) for n, v in zip(names, rep.argmax)}}


def cmd_design(args) -> int:
    cfg, out = _setup(args)
    ev = _evaluator(cfg)
    design_path = out / "design.csv"
    try:
        res = forlion_run(ev, cfg.region, cfg.forlion)
    except MaxIterExceeded as exc:
        write_design(design_path, exc.design, cfg.names)
        write_jsonl(out / "audit.jsonl", exc.audit or [])
        raise
    write_design(design_path, res.design, cfg.names)
    write_jsonl(out / "audit.jsonl", res.audit)
    rep = verify_design(ev, res.design, cfg.region, cfg.grid_density, cfg.verify_tol, cfg.forlion)
    write_json(out / "design_verify.json", _verify_record(rep, cfg.names))
    print(f"design: {res.design.m} points, objective {fmt(res.objective)}, d_max {fmt(rep.d_max)} "
          f"(p = {rep.p}) -> {design_path}")
    return EXIT_OK if rep.passed else EXIT_VERIFY_FAIL


def cmd_round(args) -> int:
    cfg, out = _setup(args)
    xi = read_design(args.design, cfg.names)
    if isinstance(xi, ExactDesign):
        xi = xi.to_approximate()
    base = cfg.rounding
    n = args.n if args.n is not None else (base.n if base else None)
    if n is None:
        raise ConfigError("the number of units n is missing (config rounding.n or --n)")
    levels = args.grid_levels if args.grid_levels else (base.grid_levels if base else None)
    if levels is None or len(levels) != cfg.region.k:
        raise ConfigError(f"need {cfg.region.k} grid levels (config rounding.grid_levels or --grid-levels)")
    rc = RoundingConfig(n=n, grid_levels=tuple(levels),
                        delta_r=args.delta_r if args.delta_r is not None else (base.delta_r if base else 0.1),
                        allocation=args.allocation or (base.allocation if base else "remainder"))
    ev = _evaluator(cfg)
    exact = round_design(ev, xi, rc, cfg.region)
    path = out / "exact_design.csv"
    write_design(path, exact, cfg.names)
    eff = efficiency_from_dets(ev.objective(exact.to_approximate()), ev.objective(xi), cfg.model.p)
    print(f"exact design: {exact.m} points, n = {exact.n}, efficiency vs approximate {eff:.6f} -> {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg, out = _setup(args)
    xi = read_design(args.design, cfg.names)
    if isinstance(xi, ExactDesign):
        xi = xi.to_approximate()
    density = args.grid_density or cfg.grid_density
    ev = _evaluator(cfg)
    rep = verify_design(ev, xi, cfg.region, density, cfg.verify_tol, cfg.forlion)
    write_json(out / "verify.json", _verify_record(rep, cfg.names))
    print(f"verify: d_max {fmt(rep.d_max)} vs p = {rep.p} (+{rep.tol:g}) -> {'pass' if rep.passed else 'FAIL'}")
    return EXIT_OK if rep.passed else EXIT_VERIFY_FAIL


def cmd_efficiency(args) -> int:
    cfg, out = _setup(args)
    designs = []
    for d in args.designs:
        xi = read_design(d, cfg.names)
        designs.append(xi.to_approximate() if isinstance(xi, ExactDesign) else xi)
    labels = args.labels or [Path(d).stem for d in args.designs]
    if len(labels) != len(designs):
        raise ConfigError("need one label per design")
    ens = cfg.ensemble()
    thetas = read_thetas(args.thetas, cfg.model.p) if args.thetas else ens.thetas
    reference: int | str = "local" if args.reference == "local" else int(args.reference)
    local = LocalOptimumCache(cfg.model, cfg.region, cfg.forlion) if reference == "local" else None
    reports = robustness_study(cfg.model, designs, thetas, reference, labels, local, args.max_local)

    ev = ExpectedInfo(cfg.model, ens)
    ew = [ev.objective(xi) for xi in designs]
    ew_ref = ew[reference] if isinstance(reference, int) else None
    p = cfg.model.p

    atomic_write_text(out / "efficiencies.csv",
                      rows_to_csv(["theta", *labels], ([b, *(float(r.efficiencies[b]) for r in reports)]
                                                       for b in range(thetas.shape[0]))))
    atomic_write_text(out / "objectives.csv",
                      rows_to_csv(["theta", *labels], ([b, *(float(r.objective_values[b]) for r in reports)]
                                                       for b in range(thetas.shape[0]))))
    rows = []
    for r, obj in zip(reports, ew):
        rel = efficiency_from_dets(obj, ew_ref, p) if ew_ref is not None else float("nan")
        rows.append([r.label, *r.summary, r.mean, float(np.mean(r.objective_values)),
                     float(np.median(r.objective_values)), float(obj), rel])
    atomic_write_text(out / "summary.csv", rows_to_csv(
        ["design", "min", "q1", "median", "q3", "max", "mean", "mean_objective", "median_objective",
         "ew_objective", "ew_relative_efficiency"], rows))
    for r in reports:
        edges, counts = frequency_bins(r.objective_values, args.bins)
        atomic_write_text(out / f"bins_{r.label}.csv", rows_to_csv(
            ["lower", "upper", "count"], ([float(a), float(b), int(c)] for a, b, c in zip(edges[:-1], edges[1:], counts))))
    for row in rows:
        print(f"{row[0]}: efficiency median {row[3]:.6f} mean {row[6]:.6f}; "
              f"mean objective {row[7]:.6f}; EW objective {fmt(row[9])}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ewdesign", description="Expected-weighted D-optimal designs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment config (YAML)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, help="worker threads (default: all cores)")
        p.add_argument("--out", help="output directory (default: config output.dir)")

    p = sub.add_parser("design", help="compute an EW D-optimal approximate design")
    common(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("round", help="round an approximate design to an exact design")
    common(p)
    p.add_argument("--design", required=True, help="approximate design CSV")
    p.add_argument("--n", type=int, help="number of experimental units")
    p.add_argument("--grid-levels", type=float, nargs="+", help="grid spacing per continuous factor")
    p.add_argument("--delta-r", type=float, help="merging threshold")
    p.add_argument("--allocation", choices=["remainder", "greedy"])
    p.set_defaults(func=cmd_round)

    p = sub.add_parser("verify", help="check a design against the equivalence theorem")
    common(p)
    p.add_argument("--design", required=True)
    p.add_argument("--grid-density", type=int, help="grid points per continuous axis")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("efficiency", help="robustness study of designs over parameter vectors")
    common(p)
    p.add_argument("--designs", nargs="+", required=True)
    p.add_argument("--labels", nargs="+")
    p.add_argument("--thetas", help="parameter CSV (default: the config ensemble)")
    p.add_argument("--reference", default="0", help="index of the reference design, or 'local'")
    p.add_argument("--max-local", type=int, default=200, help="cap on locally optimal reference designs")
    p.add_argument("--bins", type=int, default=30, help="frequency-polygon bins")
    p.set_defaults(func=cmd_efficiency)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NUMERICAL_ERRORS as exc:
        _report(exc)
        return EXIT_NUMERICAL
    except (ConfigError, DimensionMismatch, ValueError, OSError) as exc:
        _report(exc)
        return EXIT_INVALID


def _report(exc: BaseException) -> None:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
