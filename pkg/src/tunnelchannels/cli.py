"""Command-line interface.

    tunnelchannels coeffs   BARRIER --kmin K --kmax K --n N
    tunnelchannels times    BARRIER --k0 K --l0 L [--side left|right] [--a A] [--L1 X --L2 X] [--xr X] [--narrow]
    tunnelchannels validate BARRIER --k0 K --l0 L [--side ...] [--t-final T] [--dt DT]

Exit codes: 0 success, 1 validation failure, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings

import numpy as np

from .channels import GridMismatchError, make_scenario
from .oracle import DomainError, StepSizeError, validate
from .potential import BarrierError, PhaseUnwrapError, load_barrier, scatter_coeffs
from .timing import GeometryError, time_report
from .units import Units

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2

DEFAULT_N = 2048
# Default k-grid half width in units of 1/l0.
GRID_HALF_WIDTH = 6.0


class InputError(Exception):
    pass


def _units(text: str) -> Units:
    try:
        hbar, mass = (float(v) for v in text.split(","))
        return Units(hbar, mass)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--units expects 'hbar,m' with positive reals: {exc}") from None


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (tuple, list)):
        return [_json_value(x) for x in v]
    return v


def _emit_json(obj: dict, out):
    json.dump({k: _json_value(v) for k, v in obj.items()}, out, indent=2)
    out.write("\n")


def _barrier(args):
    bar = load_barrier(args.barrier)
    if getattr(args, "a", None) is not None:
        bar = bar.shifted(args.a)
    return bar


def _scenario_grid(k0: float, l0: float, n: int) -> np.ndarray:
    hi = k0 + GRID_HALF_WIDTH / l0
    lo = max(k0 - GRID_HALF_WIDTH / l0, hi * 1e-3)
    return np.linspace(lo, hi, n)


def _scenario(args, bar, units):
    if args.side == "right" and args.xr is None:
        raise InputError("--side right needs --xr")
    coeffs = scatter_coeffs(bar, _scenario_grid(args.k0, args.l0, args.n), units)
    return make_scenario(args.side, args.k0, args.l0, coeffs, args.xr), coeffs


def cmd_coeffs(args, out) -> int:
    if not (0 < args.kmin < args.kmax):
        raise InputError(f"need 0 < kmin < kmax, got {args.kmin}, {args.kmax}")
    if args.n < 3:
        raise InputError(f"need at least 3 grid points, got {args.n}")
    coeffs = scatter_coeffs(_barrier(args), np.linspace(args.kmin, args.kmax, args.n), args.units)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["k", "T", "R", "J", "F", "Jprime", "Fprime"])
    cols = (coeffs.kgrid, coeffs.T, coeffs.R, coeffs.J, coeffs.F, coeffs.Jprime, coeffs.Fprime)
    for row in zip(*cols):
        writer.writerow([repr(float(v)) for v in row])
    return EXIT_OK


def cmd_times(args, out) -> int:
    bar = _barrier(args)
    scenario, coeffs = _scenario(args, bar, args.units)
    if (args.L1 is None) != (args.L2 is None):
        raise InputError("--L1 and --L2 go together")
    rep = time_report(scenario, coeffs, args.L1, args.L2, narrow=args.narrow)
    _emit_json(rep.as_dict(), out)
    return EXIT_OK


def cmd_validate(args, out) -> int:
    bar = _barrier(args)
    scenario, _ = _scenario(args, bar, args.units)
    try:
        rep = validate(bar, scenario, args.t_final, args.dt, units=args.units)
    except (StepSizeError, DomainError) as exc:
        _emit_json({"passed": False, "error": type(exc).__name__, "message": str(exc)}, out)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    flat = {k: v for k, v in vars(rep).items() if k != "deviations"}
    flat.update({f"dev_{k}": v for k, v in rep.deviations.items()})
    _emit_json(flat, out)
    return EXIT_OK if rep.passed else EXIT_FAILED


def _scenario_flags(p):
    p.add_argument("--side", choices=("left", "right"), default="left")
    p.add_argument("--k0", type=float, required=True)
    p.add_argument("--l0", type=float, required=True)
    p.add_argument("--a", type=float, help="move the barrier so that it starts at A")
    p.add_argument("--xr", type=float, help="source position for --side right")
    p.add_argument("--n", type=int, default=DEFAULT_N, help="k-grid points (default %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tunnelchannels", description=__doc__.split("\n")[0])
    parser.add_argument("--units", type=_units, default=Units(), help="hbar,m (default 1,1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", help="tabulate T, R, J, F and derivatives as CSV")
    p.add_argument("barrier")
    p.add_argument("--kmin", type=float, required=True)
    p.add_argument("--kmax", type=float, required=True)
    p.add_argument("--n", type=int, default=DEFAULT_N)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("times", help="characteristic times of one scenario as JSON")
    p.add_argument("barrier")
    _scenario_flags(p)
    p.add_argument("--L1", type=float)
    p.add_argument("--L2", type=float)
    p.add_argument("--narrow", action="store_true", help="also report the narrow-packet scattering lengths")
    p.set_defaults(func=cmd_times)

    p = sub.add_parser("validate", help="compare the asymptotes with a split-step propagation")
    p.add_argument("barrier")
    _scenario_flags(p)
    p.add_argument("--t-final", type=float, dest="t_final")
    p.add_argument("--dt", type=float)
    p.set_defaults(func=cmd_validate)
    return parser


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            warnings.showwarning = _show_warning
            return args.func(args, out)
    except (InputError, BarrierError, GeometryError, GridMismatchError, PhaseUnwrapError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
