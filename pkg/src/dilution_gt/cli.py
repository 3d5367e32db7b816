"""Command-line entry point: ``dilution-gt {simulate,bounds,sweep,oracle}``.

Exit codes: 0 success, 2 usage or domain error, 3 instance too large for the
ML oracle. Only the report goes to stdout; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys

import numpy as np

from . import bounds
from .decode import GuardError
from .harness import ExperimentConfig, pooled_standard_error, run_experiment, sweep
from .model import ProblemParams, resolve_alpha

log = logging.getLogger("dilution_gt")

EXIT_USAGE = 2
EXIT_GUARD = 3

SIMULATE_COLUMNS = [
    "n", "d", "q", "alpha", "N", "delta", "decoder", "trials", "failures",
    "fn_events", "fp_events", "p_e_hat", "ci_low", "ci_high", "seed",
]
BOUNDS_COLUMNS = [
    "n", "d", "q", "alpha", "theta", "eta", "psi", "delta_star", "N_fn", "N_fp",
    "N_achievability", "N_logn", "prefactor", "N_converse", "rate_ncomp", "rate_it", "mode",
]
SWEEP_COLUMNS = [
    "n", "d", "q", "alpha", "N", "delta", "decoder", "trials", "failures", "fn_events",
    "fp_events", "p_e_hat", "ci_low", "ci_high", "eta", "psi", "delta_star", "N_fn", "N_fp",
    "N_ach", "N_conv", "rate_ncomp", "rate_it", "seed",
]
ORACLE_COLUMNS = [
    "n", "d", "q", "alpha", "N", "delta", "trials", "ncomp_failures", "ml_failures",
    "ncomp_p_e_hat", "ml_p_e_hat", "pooled_se", "ml_dominates", "seed",
]


class UsageError(ValueError):
    pass


# -- Serialization -----------------------------------------------------------

def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _json_value(v):
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def render_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def render_json(obj) -> str:
    if isinstance(obj, list):
        obj = [_json_value(r) for r in obj]
    else:
        obj = _json_value(obj)
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- Flag parsing ------------------------------------------------------------

def parse_alpha(s: str):
    if s == "adaptive":
        return None
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--alpha must be 'adaptive' or a number, got {s!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError("--alpha must be positive")
    return v


def parse_delta(s: str):
    if s in ("explicit", "asymptotic"):
        return s
    try:
        return float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--delta must be 'explicit', 'asymptotic' or a number, got {s!r}")


def parse_grid(s: str) -> tuple[float, float, int]:
    parts = s.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be lo:hi:steps, got {s!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be lo:hi:steps, got {s!r}")
    if steps < 1 or (steps == 1 and lo != hi) or not (math.isfinite(lo) and math.isfinite(hi)):
        raise argparse.ArgumentTypeError(f"malformed grid {s!r}")
    return lo, hi, steps


def grid_values(spec: tuple[float, float, int], log_spacing: bool) -> list[float]:
    lo, hi, steps = spec
    if log_spacing:
        if lo <= 0 or hi <= 0:
            raise UsageError("log-spaced grids need positive endpoints")
        return np.geomspace(lo, hi, steps).tolist()
    return np.linspace(lo, hi, steps).tolist()


def parse_float_list(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")


def _default_seed() -> int:
    env = os.environ.get("GT_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"GT_SEED must be an integer, got {env!r}")


def _add_common(p: argparse.ArgumentParser, *, need_N: bool = True):
    p.add_argument("--n", type=int, required=True, help="number of items")
    p.add_argument("--d", type=int, required=True, help="number of defectives")
    p.add_argument("--q", type=float, required=need_N, help="dilution probability")
    if need_N:
        p.add_argument("--N", type=int, required=True, help="number of tests")
    p.add_argument("--alpha", type=parse_alpha, default=None, help="'adaptive' (default) or a fixed value")
    p.add_argument("--delta", type=parse_delta, default="explicit",
                   help="NCOMP slack: 'explicit', 'asymptotic' or a number")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=None, help="master seed (falls back to $GT_SEED, then 0)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None, help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dilution-gt",
                                     description="Group testing under dilution noise: simulation and bounds.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="estimate decoder error probability")
    _add_common(p)
    p.add_argument("--decoder", choices=("ncomp", "ml"), default="ncomp")
    p.add_argument("--fixed-design", action="store_true", help="reuse one design across trials")

    p = sub.add_parser("bounds", help="evaluate achievability and converse bounds")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--q", type=parse_float_list, required=True, help="one value or a comma-separated list")
    p.add_argument("--alpha", type=parse_alpha, default=None)
    p.add_argument("--mode", choices=("exact", "asymptotic"), default="exact")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)

    p = sub.add_parser("sweep", help="simulate over a q or N grid and join with bounds")
    _add_common(p, need_N=False)
    p.add_argument("--N", type=int, default=None, help="number of tests (with --q-grid)")
    p.add_argument("--decoder", choices=("ncomp", "ml"), default="ncomp")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--q-grid", type=parse_grid, help="lo:hi:steps, endpoints included")
    g.add_argument("--N-grid", type=parse_grid, help="lo:hi:steps, endpoints included")
    p.add_argument("--log-grid", action="store_true", help="geometric instead of linear spacing")
    p.add_argument("--mode", choices=("exact", "asymptotic"), default="exact", help="bound evaluation mode")
    p.add_argument("--fixed-design", action="store_true")

    p = sub.add_parser("oracle", help="compare NCOMP with exhaustive ML on matched trials")
    _add_common(p)
    return parser


# -- Commands ----------------------------------------------------------------

def _seed(args) -> int:
    return args.seed if args.seed is not None else _default_seed()


def _config(args, params, decoder, seed) -> ExperimentConfig:
    return ExperimentConfig(params=params, decoder=decoder, delta=args.delta, trials=args.trials,
                            master_seed=seed, jobs=args.jobs,
                            fixed_design=getattr(args, "fixed_design", False))


def _stats_row(cfg: ExperimentConfig, stats) -> dict:
    p = cfg.params
    delta = cfg.resolved_delta()
    return {
        "n": p.n, "d": p.d, "q": p.q, "alpha": resolve_alpha(p), "N": p.N,
        "delta": None if math.isnan(delta) else delta, "decoder": cfg.decoder,
        "trials": stats.trials, "failures": stats.failures, "fn_events": stats.fn_events,
        "fp_events": stats.fp_events, "p_e_hat": stats.p_e_hat, "ci_low": stats.ci_low,
        "ci_high": stats.ci_high, "seed": cfg.master_seed,
    }


def cmd_simulate(args) -> str:
    seed = _seed(args)
    params = ProblemParams(args.n, args.d, args.q, args.alpha, args.N)
    cfg = _config(args, params, args.decoder, seed)
    row = _stats_row(cfg, run_experiment(cfg))
    if args.format == "csv":
        return render_csv([row], SIMULATE_COLUMNS)
    obj = {"params": {k: row[k] for k in ("n", "d", "q", "alpha", "N", "delta")}}
    obj.update({k: row[k] for k in ("decoder", "trials", "failures", "fn_events", "fp_events",
                                    "p_e_hat", "ci_low", "ci_high", "seed")})
    return render_json(obj)


def cmd_bounds(args) -> str:
    rows = [bounds.bound_report(args.n, args.d, q, args.alpha, args.mode).asdict() for q in args.q]
    if args.format == "csv":
        return render_csv(rows, BOUNDS_COLUMNS)
    return render_json(rows[0] if len(rows) == 1 else rows)


def cmd_sweep(args) -> str:
    seed = _seed(args)
    if args.q_grid is not None:
        if args.N is None:
            raise UsageError("--q-grid needs --N")
        points = [(q, args.N) for q in grid_values(args.q_grid, args.log_grid)]
    else:
        if args.q is None:
            raise UsageError("--N-grid needs --q")
        Ns = [int(round(v)) for v in grid_values(args.N_grid, args.log_grid)]
        points = [(args.q, N) for N in Ns]
    configs = [_config(args, ProblemParams(args.n, args.d, q, args.alpha, N), args.decoder, seed)
               for q, N in points]
    rows = []
    for pt in sweep(configs, args.mode):
        row = _stats_row(pt.config, pt.stats)
        b = pt.bounds
        if b is not None:
            row.update(eta=b.eta, psi=b.psi, delta_star=b.delta_star, N_fn=b.N_fn, N_fp=b.N_fp,
                       N_ach=b.N_achievability, N_conv=b.N_converse, rate_ncomp=b.rate_ncomp,
                       rate_it=b.rate_it)
        rows.append(row)
    if args.format == "csv":
        return render_csv(rows, SWEEP_COLUMNS)
    return render_json([{c: r.get(c) for c in SWEEP_COLUMNS} for r in rows])


def cmd_oracle(args) -> str:
    seed = _seed(args)
    params = ProblemParams(args.n, args.d, args.q, args.alpha, args.N)
    ml_cfg = _config(args, params, "ml", seed)
    nc_cfg = _config(args, params, "ncomp", seed)
    ml, nc = run_experiment(ml_cfg), run_experiment(nc_cfg)
    se = pooled_standard_error(ml, nc)
    row = {
        "n": params.n, "d": params.d, "q": params.q, "alpha": resolve_alpha(params), "N": params.N,
        "delta": nc_cfg.resolved_delta(), "trials": args.trials,
        "ncomp_failures": nc.failures, "ml_failures": ml.failures,
        "ncomp_p_e_hat": nc.p_e_hat, "ml_p_e_hat": ml.p_e_hat, "pooled_se": se,
        "ml_dominates": ml.p_e_hat <= nc.p_e_hat + 2 * se, "seed": seed,
    }
    if args.format == "csv":
        return render_csv([row], ORACLE_COLUMNS)
    return render_json(row)


COMMANDS = {"simulate": cmd_simulate, "bounds": cmd_bounds, "sweep": cmd_sweep, "oracle": cmd_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = COMMANDS[args.command](args)
    except GuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ValueError, ArithmeticError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    emit(text, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
