"""Command-line interface.

    ptes run SCENARIO [--out DIR] [--decimate N] [--no-plot]
    ptes sweep SCENARIO --omega w1,w2,... [--out DIR] [--jobs N]
    ptes check [--filter NAME] [--list]
    ptes select-t --D x --Tstar y [--dzeta a --dxi b]

Exit codes: 0 success, 1 property failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import sys

from .dde import IntegrationError
from .scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("frequencies must be positive")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ptes", description="Prescribed-time Newton extremum seeking simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate one scenario")
    r.add_argument("scenario")
    r.add_argument("--out", default="out", help="output directory (default: out)")
    r.add_argument("--decimate", type=int, default=None, help="keep every N-th row")
    r.add_argument("--no-plot", action="store_true", help="skip the PNG figure")

    s = sub.add_parser("sweep", help="closeness to the averaged run across dither frequencies")
    s.add_argument("scenario")
    s.add_argument("--omega", type=_floats, required=True, help="comma-separated frequencies")
    s.add_argument("--out", default="out")
    s.add_argument("--jobs", type=int, default=1, help="parallel member runs")
    s.add_argument("--no-plot", action="store_true")

    c = sub.add_parser("check", help="run the numerical property checks")
    c.add_argument("--filter", default=None, help="only checks whose name contains this text")
    c.add_argument("--list", action="store_true", help="list check names and exit")

    t = sub.add_parser("select-t", help="feedback delay for a prescribed convergence time")
    t.add_argument("--D", type=float, required=True, help="map delay")
    t.add_argument("--Tstar", type=float, required=True, help="prescribed time")
    t.add_argument("--dzeta", type=float, default=0.0, help="phase of zeta")
    t.add_argument("--dxi", type=float, default=0.0, help="phase of xi")
    return p


def _cmd_run(args) -> int:
    from .runner import run_scenario
    scn = load_scenario(args.scenario)
    if args.decimate is not None and args.decimate < 1:
        raise ScenarioError("--decimate: must be at least 1")
    rec = run_scenario(scn, args.out, decimate=args.decimate, plot=False if args.no_plot else None)
    print(f"{rec.name}: {rec.n_steps} steps of {rec.step:g} s in {rec.wall_time:.2f} s")
    for key, val in rec.settling.items():
        pred = rec.predicted.get("t_" + key)
        extra = f" (predicted {pred:g})" if pred is not None else ""
        print(f"  settling[{key}] = {'not settled' if val is None else f'{val:g}'}{extra}")
    if "corollary_flag" in rec.metrics:
        print(f"  theta_z settles at {rec.metrics['corollary_flag']}")
    for key, path in rec.files.items():
        print(f"  {key}: {path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .runner import sweep
    scn = load_scenario(args.scenario)
    points = sweep(scn, args.omega, args.out, jobs=max(1, args.jobs))
    print("omega,step,nu_theta,nu_full")
    for p in points:
        print(f"{p.omega:g},{p.step:.6g},{p.nu_theta:.6g},{p.nu_full:.6g}")
    if not args.no_plot:
        from pathlib import Path

        from .plotting import plot_sweep
        print(f"figure: {plot_sweep(points, Path(args.out) / f'{scn.name}-sweep.png')}")
    first, last = points[0], points[-1]
    trend = "decreases" if last.nu_theta <= first.nu_theta else "does not decrease"
    print(f"nu_theta {trend} from omega = {first.omega:g} to {last.omega:g}")
    return EXIT_OK


def _cmd_check(args) -> int:
    from .checks import CHECKS, run_checks
    if args.list:
        print("\n".join(CHECKS))
        return EXIT_OK
    results = run_checks(args.filter)
    if not results:
        print(f"no check matches {args.filter!r}", file=sys.stderr)
        return EXIT_INPUT
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def _cmd_select_t(args) -> int:
    from .estimators import admissible_T_star_bound, select_T
    try:
        bound = admissible_T_star_bound(args.D, args.dzeta, args.dxi)
        tim = select_T(args.D, args.dzeta, args.dxi, args.Tstar)
    except ValueError as e:
        raise ScenarioError(str(e)) from None
    st = tim.settling
    print(f"T_star_min = {bound:.17g}")
    print(f"T = {tim.T:.17g}")
    print(f"t_hessian = {st.t_hessian:.17g}")
    print(f"t_theta = {st.t_theta:.17g}")
    print(f"tau1 = {st.tau1:.17g}")
    print(f"tau2 = {st.tau2:.17g}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "check": _cmd_check, "select-t": _cmd_select_t}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except IntegrationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
