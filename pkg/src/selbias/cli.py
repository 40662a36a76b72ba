"""Command line interface.

Every subcommand writes one envelope to standard output, as JSON (default)
or CSV.  Exit status: 0 success, 1 failed validation, 2 usage error,
3 numeric or domain error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import __version__
from ._backend import active_backend
from .bias import bias_table, max_cdf, max_exceedance_probability, selection_bias
from .errors import SelbiasError
from .model import GaussianSpec, ModelParams
from .mvn import QuadratureConfig
from .simulate import SimConfig, binned_conditional_mean, regression_fit, winner_pairs
from .truncmvn import TruncatedAboveSpec, marginal_densities_at_bounds, truncated_mean
from .validate import run_suite

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class CommandError(SelbiasError):
    """Carries the name of the operation that failed."""

    def __init__(self, operation, exc):
        super().__init__(f"{operation}: {exc}")


# ---------------------------------------------------------------- parsing


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of integers, got {text!r}")


def _pair(text):
    vals = _float_list(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma separated numbers, got {text!r}")
    return tuple(vals)


def grid(text):
    """``start:stop:step``; ``stop`` is included when it lies on the lattice."""
    parts = text.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    try:
        start, stop, step = (float(v) for v in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}")
    if not step > 0 or stop < start:
        raise argparse.ArgumentTypeError(f"empty or invalid grid {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


def _add_model_flags(p, with_p=True):
    if with_p:
        p.add_argument("--p", type=int, required=True, help="number of arms")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--gamma", type=float)
    g.add_argument("--gamma2", type=float, help="gamma squared")
    e = p.add_mutually_exclusive_group(required=True)
    e.add_argument("--eta", type=float)
    e.add_argument("--eta2", type=float, help="eta squared")
    p.add_argument("--sigma", type=float, required=True)


def _add_output_flags(p, tol=True):
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--timing", action="store_true",
                   help="report wall-clock runtime (makes output run dependent)")
    if tol:
        p.add_argument("--tol", type=float, default=QuadratureConfig.abs_tol,
                       help="absolute tolerance of the orthant quadrature")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selbias",
        description="Selection bias and post-selection means for the normal-normal treatment selection model.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bias", help="selection bias and post-selection mean at one xp")
    _add_model_flags(p)
    p.add_argument("--xp", type=float, required=True, help="value of the largest observation")
    _add_output_flags(p)

    p = sub.add_parser("table", help="bias over a sigma x p x xp x case grid")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--p", type=_int_list, required=True, help="comma list, e.g. 3,5,10")
    p.add_argument("--xp", type=grid, required=True, help="start:stop:step (inclusive)")
    p.add_argument("--case", type=_pair, action="append", required=True,
                   metavar="GAMMA2,ETA2", help="repeatable; squared gamma and eta")
    p.add_argument("--workers", type=int, default=None)
    _add_output_flags(p)

    p = sub.add_parser("exceed", help="Pr(largest observation > x)")
    _add_model_flags(p)
    p.add_argument("--x", type=float, required=True)
    _add_output_flags(p)

    p = sub.add_parser("simulate", help="Monte Carlo winner pairs")
    _add_model_flags(p)
    p.add_argument("--reps", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bin-width", type=float, default=0.25)
    p.add_argument("--summary", action="store_true", help="emit binned conditional means")
    p.add_argument("--with-regression", action="store_true",
                   help="add the OLS line of mu* on X*")
    p.add_argument("--workers", type=int, default=None)
    _add_output_flags(p)

    p = sub.add_parser("moments", help="truncated-from-above normal: alpha, g_k, means")
    p.add_argument("--theta", type=_float_list, required=True)
    om = p.add_mutually_exclusive_group(required=True)
    om.add_argument("--omega", type=_pair, metavar="C,D", help="covariance C*I + D*11'")
    om.add_argument("--omega-file", metavar="CSV", help="full covariance matrix")
    p.add_argument("--upper", type=_float_list, required=True)
    p.add_argument("--dim", type=int, default=None, help="dimension when all inputs are scalars")
    _add_output_flags(p)

    p = sub.add_parser("validate", help="run the oracle suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    _add_output_flags(p, tol=False)
    return parser


def _params(args) -> ModelParams:
    gamma = args.gamma if args.gamma is not None else _sqrt_flag("gamma2", args.gamma2)
    eta = args.eta if args.eta is not None else _sqrt_flag("eta2", args.eta2)
    return ModelParams(args.p, gamma, eta, args.sigma)


def _sqrt_flag(name, value):
    if value < 0:
        raise CommandError("model", f"--{name} must be non-negative, got {value}")
    return math.sqrt(value)


# ---------------------------------------------------------------- commands


def cmd_bias(args):
    params = _params(args)
    report = selection_bias(params, args.xp, QuadratureConfig(abs_tol=args.tol))
    return report.as_row(), None, {"quadrature_abs_tol": args.tol, "backend": active_backend()}


def cmd_table(args):
    cases = []
    for g2, e2 in args.case:
        if not (0 <= g2 <= 1 and 0 <= e2 <= 1):
            raise CommandError("table", f"case ({g2}, {e2}) outside [0, 1]")
        cases.append((math.sqrt(g2), math.sqrt(e2)))
    rows = bias_table(args.sigma, args.p, args.xp, cases,
                      QuadratureConfig(abs_tol=args.tol), workers=args.workers)
    per_case = len(rows) // len(cases)
    out = [{"case": 1 + i // per_case, **r.as_row()} for i, r in enumerate(rows)]
    return None, out, {"quadrature_abs_tol": args.tol, "backend": active_backend()}


def cmd_exceed(args):
    params = _params(args)
    quad = QuadratureConfig(abs_tol=args.tol)
    result = {
        "x": args.x,
        "exceed_probability": max_exceedance_probability(params, args.x, quad),
        "max_cdf": max_cdf(params, args.x, quad),
    }
    return result, None, {"quadrature_abs_tol": args.tol, "backend": active_backend()}


def _lambda_or_none(params, x, quad):
    try:
        return selection_bias(params, x, quad).lambda_
    except SelbiasError:
        return None


def cmd_simulate(args):
    params = _params(args)
    cfg = SimConfig(params, args.reps, args.seed, args.bin_width)
    pairs = winner_pairs(cfg, workers=args.workers)
    result = None
    line = None
    if args.with_regression:
        intercept, slope = regression_fit(pairs)
        result = {"intercept": intercept, "slope": slope}
        line = (intercept, slope)
    quad = QuadratureConfig(abs_tol=args.tol)
    if args.summary:
        rows = []
        for b in binned_conditional_mean(pairs, cfg.bin_width):
            row = {"center": b.center, "mean_mu_star": b.mean, "count": b.count, "se": b.se,
                   "lambda": _lambda_or_none(params, b.center, quad)}
            if line:
                row["regression_prediction"] = line[0] + line[1] * b.center
            rows.append(row)
    else:
        rows = []
        for i, pr in enumerate(pairs):
            row = {"replication": i, "winner_index": pr.winner_index,
                   "x_star": pr.x_star, "mu_star": pr.mu_star}
            if line:
                row["regression_intercept"], row["regression_slope"] = line
            rows.append(row)
    return result, rows, {"seed": args.seed, "reps": args.reps, "bin_width": args.bin_width}


def _read_matrix(path):
    with open(path, newline="") as fh:
        data = [[float(v) for v in row] for row in csv.reader(fh) if row]
    return np.array(data, dtype=float)


def cmd_moments(args):
    theta, upper = list(args.theta), list(args.upper)
    if args.omega_file:
        cov = _read_matrix(args.omega_file)
        n = cov.shape[0]
    else:
        n = args.dim or max(len(theta), len(upper))
    theta = theta * n if len(theta) == 1 else theta
    upper = upper * n if len(upper) == 1 else upper
    if len(theta) != n or len(upper) != n:
        raise CommandError("moments", f"--theta and --upper must have length {n}")
    quad = QuadratureConfig(abs_tol=args.tol)
    if args.omega_file:
        base = GaussianSpec(theta, cov)
    else:
        base = GaussianSpec.equicorrelated(theta, *args.omega)
    spec = TruncatedAboveSpec(base, upper, quad=quad)
    g = marginal_densities_at_bounds(spec)
    means = truncated_mean(spec)
    rows = [{"k": k + 1, "theta": theta[k], "upper": upper[k],
             "centered_bound": float(spec.centered_upper[k]),
             "g_at_bound": float(g[k]), "truncated_mean": float(means[k]),
             "alpha": spec.alpha} for k in range(n)]
    engine = "quadrature" if base.equicorr is not None else "qmc"
    return {"alpha": spec.alpha}, rows, {"engine": engine, "quadrature_abs_tol": args.tol}


def cmd_validate(args):
    checks = run_suite(args.seed, args.level)
    rows = [{"check": c.name, "passed": c.passed, "detail": c.detail} for c in checks]
    passed = all(c.passed for c in checks)
    for c in checks:
        print(c.line(), file=sys.stderr)
    return {"passed": passed}, rows, {"seed": args.seed, "level": args.level,
                                      "backend": active_backend()}


COMMANDS = {
    "bias": cmd_bias,
    "table": cmd_table,
    "exceed": cmd_exceed,
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "validate": cmd_validate,
}


# ---------------------------------------------------------------- output


def _plain(value):
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def _echo(args):
    skip = {"command", "format", "timing"}
    return {k: _plain(v) for k, v in vars(args).items() if k not in skip}


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(result, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    table = rows if rows is not None else [result]
    if table:
        header = list(table[0])
        for row in table[1:]:
            header += [k for k in row if k not in header]
        writer.writerow(header)
        for row in table:
            writer.writerow([_cell(row.get(k)) for k in header])
    return buf.getvalue()


def render_json(envelope) -> str:
    return json.dumps(envelope, allow_nan=False) + "\n"


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    t0 = time.perf_counter()
    try:
        result, rows, diagnostics = COMMANDS[args.command](args)
    except SelbiasError as exc:
        message = str(exc) if isinstance(exc, CommandError) else f"{args.command}: {exc}"
        print(f"selbias: error: {message}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"selbias: error: {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.timing:
        diagnostics["runtime_s"] = time.perf_counter() - t0
    envelope = {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "params": _echo(args),
        "result": _plain(result),
        "rows": _plain(rows),
        "diagnostics": _plain(diagnostics),
    }
    if args.format == "csv":
        stdout.write(render_csv(envelope["result"], envelope["rows"]))
    else:
        stdout.write(render_json(envelope))
    if args.command == "validate" and not result["passed"]:
        return EXIT_FAILED
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
