"""Command-line interface.

    agglom run CONFIG            run a scenario from a config file
    agglom scenario NAME         run a built-in scenario
    agglom converge CONFIG       agent-to-continuum convergence sweep
    agglom stability-scan CONFIG critical movement-cost bracket

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .analysis import critical_cM_scan
from .errors import ConfigurationError, NumericError
from .scenarios import (
    BUILTIN_NAMES,
    Scenario,
    builtin_scenario,
    convergence_experiment,
    parse_config,
    run_scenario,
    write_convergence_report,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out", metavar="DIR", default=None, help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sub.add_argument("--grid", nargs=2, type=int, metavar=("NX", "NY"), default=None)
    sub.add_argument("--safety", type=float, default=None, help="CFL safety factor")
    sub.add_argument(
        "--snapshots", default=None, metavar="T1,T2,...",
        help="comma-separated snapshot times",
    )


def _apply_flags(scenario: Scenario, args) -> Scenario:
    if args.seed is not None:
        scenario = replace(
            scenario,
            params=scenario.params.with_(seed=args.seed),
            init=replace(scenario.init, seed=args.seed),
        )
    if args.grid is not None:
        scenario = replace(scenario, nx=args.grid[0], ny=args.grid[1])
    if args.safety is not None:
        scenario = replace(scenario, safety=args.safety)
    if args.snapshots is not None:
        try:
            times = tuple(float(tok) for tok in args.snapshots.split(",") if tok)
        except ValueError:
            raise ConfigurationError(f"--snapshots: cannot parse {args.snapshots!r}")
        scenario = replace(scenario, snapshot_times=times)
    return scenario


def _default_out(name: str) -> str:
    return f"out/{name}"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="agglom",
        description="Spatial agglomeration simulator: agents and continuum limit",
    )
    parser.add_argument("--version", action="version", version=f"agglom {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="run a scenario from a config file")
    p_run.add_argument("config")
    _add_common_flags(p_run)

    p_scn = subs.add_parser("scenario", help="run a built-in scenario")
    p_scn.add_argument("name", choices=sorted(BUILTIN_NAMES))
    _add_common_flags(p_scn)

    p_conv = subs.add_parser("converge", help="agent-count convergence experiment")
    p_conv.add_argument("config")
    p_conv.add_argument("--n-list", default="2000,8000,32000", metavar="N1,N2,...")
    p_conv.add_argument("--seeds", type=int, default=5, help="number of seeds")
    _add_common_flags(p_conv)

    p_scan = subs.add_parser("stability-scan", help="bracket the critical movement cost")
    p_scan.add_argument("config")
    _add_common_flags(p_scan)

    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            scenario = _apply_flags(parse_config(args.config), args)
            out = args.out or _default_out(scenario.name)
            result = run_scenario(scenario, out_dir=out)
            print(f"wrote {len(result.files)} files to {out}")
        elif args.command == "scenario":
            scenario = _apply_flags(builtin_scenario(args.name), args)
            out = args.out or _default_out(scenario.name)
            result = run_scenario(scenario, out_dir=out)
            print(f"wrote {len(result.files)} files to {out}")
        elif args.command == "converge":
            scenario = _apply_flags(parse_config(args.config), args)
            n_list = [int(tok) for tok in args.n_list.split(",") if tok]
            report = convergence_experiment(scenario, n_list, seeds=range(args.seeds))
            out = Path(args.out or _default_out(scenario.name))
            out.mkdir(parents=True, exist_ok=True)
            path = out / "convergence.csv"
            write_convergence_report(path, report)
            for n, med in report["median_L1"].items():
                print(f"N={n:>8d}  median L1 = {med:.6f}")
            print(f"wrote {path}")
        elif args.command == "stability-scan":
            scenario = _apply_flags(parse_config(args.config), args)
            grid = scenario.make_grid()
            kernel = scenario.spillover_kernel(grid)
            l_bar = scenario.total_mass / grid.area
            lo, hi = critical_cM_scan(scenario.params, l_bar, kernel)
            print(f"critical c_M bracket: [{lo!r}, {hi!r}] at mean density {l_bar!r}")
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
