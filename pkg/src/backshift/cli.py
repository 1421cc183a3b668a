"""Command-line front end.

Subcommands: estimate, simulate, stability, diagnose, identifiability.
Exit codes: 0 success, 1 other package error, 2 usage, 3 ParseError,
4 NeedMultipleEnvironments, 5 ModelAssumptionsViolated, 6 StabilityFailed,
7 IoError.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import (
    BackShiftError,
    IoError,
    ModelAssumptionsViolated,
    NeedMultipleEnvironments,
    ParseError,
    StabilityFailed,
)
from .jointdiag import DiagonalizerOptions
from .pipeline import (
    EstimateConfig,
    check_identifiability,
    diagnose,
    estimate,
    intervention_variances,
)
from .scatter import build_scatter_set, window_group
from .simulator import InterventionSpec, generate_network, reference_network, simulate
from .stability import StabilityConfig, stability_select

log = logging.getLogger("backshift")

EXIT_CODES = {
    ParseError: 3,
    NeedMultipleEnvironments: 4,
    ModelAssumptionsViolated: 5,
    StabilityFailed: 6,
    IoError: 7,
}
MODE_NAMES = {"cov": "covariance", "gram": "gram"}


def _seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("BACKSHIFT_SEED")
    if env is None or not env.strip():
        return None
    try:
        return int(env)
    except ValueError:
        raise SystemExit(f"BACKSHIFT_SEED must be an integer, got {env!r}") from None


def _load(args):
    if args.window_len is not None:
        series, names = io.ingest_series(args.input)
        stride = args.window_stride if args.window_stride is not None else args.window_len
        return window_group(series, args.window_len, stride, names)
    return io.ingest_csv(args.input)


def _config(args) -> EstimateConfig:
    return EstimateConfig(
        MODE_NAMES[args.mode],
        DiagonalizerOptions(tol=args.tol, max_iter=args.max_iter),
    )


def _formats(args):
    return args.format or ["json", "dot", "csv"]


def _baseline(args):
    return "min_zero" if args.baseline == "min" else args.baseline


def cmd_estimate(args) -> int:
    dataset = _load(args)
    est = estimate(dataset, _config(args))
    profile = diag = None
    if not est.empty:
        profile = intervention_variances(est, est.scatter, _baseline(args))
        diag = diagnose(est, est.scatter)
    io.emit_results(est, profile, diag, _formats(args), args.output_dir,
                    dataset.variable_names, args.threshold)
    for w in est.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_CODES[ModelAssumptionsViolated] if est.assumptions_violated else 0


def cmd_diagnose(args) -> int:
    dataset = _load(args)
    est = estimate(dataset, _config(args))
    if est.assumptions_violated:
        raise ModelAssumptionsViolated("; ".join(est.warnings))
    profile = diag = None
    if not est.empty:
        residual_scatter = build_scatter_set(dataset, MODE_NAMES[args.residual_mode])
        diag = diagnose(est, residual_scatter)
        profile = intervention_variances(est, est.scatter, _baseline(args))
    io.emit_results(est, profile, diag, ["json"], args.output_dir,
                    dataset.variable_names, args.threshold)
    if diag is not None:
        names = dataset.variable_names
        for lab, v in zip(diag.labels, diag.top_violation):
            print(f"{lab}\t{names[v.pair[0]]}<->{names[v.pair[1]]}\t{v.magnitude!r}")
    return 0


def cmd_identifiability(args) -> int:
    dataset = _load(args)
    est = estimate(dataset, _config(args))
    if est.empty:
        print("estimate is empty; intervention variances unavailable", file=sys.stderr)
        result = {"identifiable": False, "violating_pairs": None, "warnings": est.warnings}
    else:
        profile = intervention_variances(est, est.scatter)
        check = check_identifiability(profile.delta_variances)
        names = dataset.variable_names
        result = {
            "identifiable": check.identifiable,
            "violating_pairs": [[names[k], names[l]] for k, l in check.violating_pairs],
            "warnings": est.warnings,
        }
    text = json.dumps(result, indent=2) + "\n"
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "identifiability.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_stability(args) -> int:
    dataset = _load(args)
    cfg = StabilityConfig(
        ev_bound=args.ev, pi_thr=args.pi_thr, n_subsamples=args.subsamples,
        subsample_fraction=args.fraction, q=args.q, seed=_seed(args), n_jobs=args.jobs,
    )
    res = stability_select(dataset, cfg, _config(args))
    names = dataset.variable_names
    data = {
        "variables": names,
        "orientation": io.ORIENTATION,
        "frequencies": [[float(v) for v in row] for row in res.frequencies],
        "q": res.q_used,
        "ev_bound": cfg.ev_bound,
        "pi_thr": cfg.pi_thr,
        "runs": res.n_runs,
        "failed_runs": res.n_failed,
        "selected": [
            {"source": names[e.source], "target": names[e.target], "frequency": e.weight}
            for e in res.selected
        ],
    }
    out = Path(args.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "stability.json").write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
        lines = ["digraph stability {"] + [f'  "{n}";' for n in names]
        lines += [
            f'  "{names[e.source]}" -> "{names[e.target]}" [label="{e.weight:.2f}"];'
            for e in res.selected
        ]
        (out / "stability.dot").write_text("\n".join(lines + ["}"]) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return 0


def cmd_simulate(args) -> int:
    seed = _seed(args)
    if args.p is None:
        model = reference_network(hidden=args.hidden, seed=seed)
    else:
        model = generate_network(args.p, hidden=args.hidden, seed=seed, edge_prob=args.edge_prob)
    spec = InterventionSpec(args.m_i, beta_per_observation=args.beta_per_observation)
    dataset = simulate(model, spec, [args.n] * args.environments, seed=seed)
    out = Path(args.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    io.write_dataset_csv(dataset, out / "data.csv")
    truth = {
        "variables": dataset.variable_names,
        "orientation": io.ORIENTATION,
        "B": [[float(v) for v in row] for row in model.B],
        "hidden": model.hidden,
        "gamma": None if model.gamma is None else [float(g) for g in model.gamma],
        "m_I": args.m_i,
        "m_I_parameterization": "mean of the exponential distribution",
        "seed": seed,
    }
    try:
        (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return 0


def _add_common(p: argparse.ArgumentParser, needs_input: bool = True) -> None:
    if needs_input:
        p.add_argument("--input", required=True, help="CSV with an 'env' column")
        p.add_argument("--mode", choices=sorted(MODE_NAMES), default="cov")
        p.add_argument("--window-len", type=int, default=None,
                       help="group a time series into blocks of this many rows")
        p.add_argument("--window-stride", type=int, default=None,
                       help="rows between block starts (default: window length)")
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--max-iter", type=int, default=500)
        p.add_argument("--threshold", type=float, default=0.25)
        p.add_argument("--baseline", default="min",
                       help="'min' (smallest variance is zero) or an environment label")
    p.add_argument("--output-dir", default=".")
    p.add_argument("--seed", type=int, default=None,
                   help="random seed (falls back to $BACKSHIFT_SEED)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="backshift", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate the connectivity matrix")
    _add_common(p)
    p.add_argument("--format", action="append", choices=io.FORMATS)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("diagnose", help="report mechanism violations per environment")
    _add_common(p)
    p.add_argument("--residual-mode", choices=sorted(MODE_NAMES), default="gram")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("identifiability", help="check the identifiability condition")
    _add_common(p)
    p.set_defaults(func=cmd_identifiability)

    p = sub.add_parser("stability", help="stability selection over subsamples")
    _add_common(p)
    p.add_argument("--subsamples", type=int, default=100)
    p.add_argument("--ev", type=float, default=2.0)
    p.add_argument("--pi-thr", type=float, default=0.75)
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser(
        "simulate",
        help="generate synthetic data",
        description="m_I is the MEAN of the exponential intervention-strength draw; "
                    "m_I = 0 means no interventions.",
    )
    _add_common(p, needs_input=False)
    p.add_argument("--p", type=int, default=None, help="random graph size (default: reference graph)")
    p.add_argument("--edge-prob", type=float, default=0.15)
    p.add_argument("--n", type=int, default=10000, help="observations per environment")
    p.add_argument("--environments", type=int, default=10)
    p.add_argument("--m-i", type=float, default=1.0)
    p.add_argument("--hidden", action="store_true")
    p.add_argument("--beta-per-observation", action="store_true",
                   help="redraw the intervention strength for every observation")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.ERROR,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "threshold", 0.0) < 0:
        parser.error("--threshold must be nonnegative")
    try:
        return args.func(args)
    except BackShiftError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        for cls, code in EXIT_CODES.items():
            if isinstance(exc, cls):
                return code
        return 1


if __name__ == "__main__":
    sys.exit(main())
