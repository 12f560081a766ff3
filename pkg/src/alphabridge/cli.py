"""
Command-line front end.

Exit codes: 0 success, 1 usage error, 2 numerical or domain error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import BridgeError, SpecError
from .estimators import estimate, format_float
from .experiments import load_spec, persist_summary, run_experiment
from .model import (
    BridgeParams,
    covariance,
    limit_variance,
    lil_envelope,
    rescaled_qv,
    variance,
)
from .pathio import read_path_csv, write_path_csv
from .samplers import (
    SeedSpec,
    geometric_grid,
    sample_euler,
    sample_exact,
    sample_joint,
    uniform_grid,
)

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _build_parser():
    parser = _Parser(prog="alphabridge", description="alpha-Wiener bridge toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("sample", help="sample one path and write it as t,x CSV")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--horizon", type=float, required=True, help="terminal time T")
    grid = p.add_mutually_exclusive_group(required=True)
    grid.add_argument("--steps", type=int, help="uniform grid with this many steps")
    grid.add_argument("--geometric", type=float, metavar="R",
                      help="geometric grid T - T*R**k accumulating at T")
    p.add_argument("--t-end", type=float, required=True, help="last observation time")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--method", choices=("exact", "joint", "euler"), default="exact")
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate", help="estimate alpha and sigma^2 from a path CSV")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--horizon-T", dest="horizon_T", type=float, required=True)
    p.add_argument("--t", type=float, default=None,
                   help="observation horizon (default: last grid point)")
    p.add_argument("--sigma2", type=float, default=None,
                   help="known sigma^2 for the Ito correction (default 1)")

    p = sub.add_parser("table", help="print closed-form values")
    p.add_argument("--what", required=True,
                   choices=("cov", "var", "qv", "envelope", "limit-var"))
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--t", type=str, help="time, or comma-separated list of times")
    p.add_argument("--horizon", type=float, required=True)

    p = sub.add_parser("experiment", help="run an experiment spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump-paths", default=None, metavar="DIR")
    p.add_argument("--timing", action="store_true",
                   help="include wall-clock seconds in the summary JSON")
    return parser


def _cmd_sample(args, out):
    params = BridgeParams(args.alpha, args.sigma, args.horizon)
    if args.steps is not None:
        grid = uniform_grid(args.t_end, args.steps)
    else:
        grid = geometric_grid(args.horizon, args.t_end, args.geometric)
    sampler = {"exact": sample_exact, "joint": sample_joint, "euler": sample_euler}[args.method]
    path = sampler(params, grid, SeedSpec(args.seed, args.replicate))
    write_path_csv(path, args.out)


def _cmd_estimate(args, out):
    path = read_path_csv(args.in_path, args.horizon_T)
    report = estimate(path, args.t, args.sigma2)
    print(report.to_json(), file=out)


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"alphabridge table: --what {args.what} requires {flags}")


def _times(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"alphabridge table: invalid --t value {text!r}") from None


def _cmd_table(args, out):
    T = args.horizon
    if args.what == "limit-var":
        print(repr(float(limit_variance(args.alpha, T))), file=out)
        return
    if args.what == "cov":
        _need(args, "beta", "s", "t")
    else:
        _need(args, "t")
    times = _times(args.t)
    funcs = {
        "cov": lambda t: covariance(args.alpha, args.beta, args.s, t, T),
        "var": lambda t: variance(args.alpha, t, T),
        "qv": lambda t: rescaled_qv(args.alpha, t, T),
        "envelope": lambda t: lil_envelope(args.alpha, t, T),
    }
    values = [float(funcs[args.what](t)) for t in times]
    if len(times) == 1:
        print(repr(values[0]), file=out)
    else:
        print("t,value", file=out)
        for t, v in zip(times, values):
            print(f"{repr(t)},{repr(v)}", file=out)


def _cmd_experiment(args, out):
    spec = load_spec(args.spec)
    summary = run_experiment(spec, workers=args.workers, dump_dir=args.dump_paths)
    persist_summary(summary, args.out, include_timing=args.timing)
    verdict = "PASS" if summary.passed else "FAIL"
    print(f"{summary.kind}: {verdict} ({len(summary.checks)} checks, "
          f"{summary.failures} failed replicates, "
          f"{summary.wall_clock_seconds:.2f} s)", file=out)


COMMANDS = {
    "sample": _cmd_sample,
    "estimate": _cmd_estimate,
    "table": _cmd_table,
    "experiment": _cmd_experiment,
}


def dispatch(argv, out=None, err=None) -> int:
    """Run one CLI invocation and return its exit code."""
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = _build_parser().parse_args(argv)
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(str(exc), file=err)
        return EXIT_USAGE
    except SpecError as exc:
        print(f"alphabridge: invalid spec: {exc}", file=err)
        return EXIT_USAGE
    except BridgeError as exc:
        print(f"alphabridge: {exc}", file=err)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"alphabridge: {exc}", file=err)
        return EXIT_IO
    except SystemExit as exc:
        # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    return EXIT_OK


def main():
    sys.exit(dispatch(sys.argv[1:]))
