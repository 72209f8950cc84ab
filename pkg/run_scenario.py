#!/usr/bin/env python3
"""
Scenario runner for the warped-product verification engine.

Commands:
    run <scenario> [--set key=value]... [--out dir] [--seed n] [--verbose]
    list
    describe <check>

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration error.

Trace CSV columns, in order: t, x1..xn, v1..vn, b, omega,
clairaut_invariant, then the residual columns of the requested checks
sorted by name. Residual columns are empty at samples a check skips.

Expressions (warps, Clairaut functions, factor maps) use + - * / ^, calls
such as sin(x1) and the constants pi and e. '^' is right-associative and
binds tighter than a leading minus: -x1^2 is -(x1^2), 2^3^2 is 2^(3^2).

Checks also answer to short aliases (describe shows them), e.g. thm32 for
clairaut or thm34:2 for sectional:fiber-plane.
"""

import asyncio
import os
import sys
import logging
import argparse
from pathlib import Path
from typing import List, Optional

from colorama import Fore, Style, init as colorama_init

# Add backend to path
backend_dir = Path(__file__).parent / "backend"
sys.path.insert(0, str(backend_dir))

from services import settings
from services.catalog import list_catalog
from services.check_registry import describe_check, list_checks
from services.errors import ConfigError, UnknownCheck
from services.report_writer import write_run
from services.scenario_loader import load_scenario
from services.verification_pipeline import RunResult, VerificationPipeline

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2

logger = logging.getLogger("run_scenario")


# Colors for terminal output
class Colors:
    HEADER = Fore.MAGENTA
    OKBLUE = Fore.BLUE
    OKCYAN = Fore.CYAN
    OKGREEN = Fore.GREEN
    WARNING = Fore.YELLOW
    FAIL = Fore.RED
    ENDC = Style.RESET_ALL
    BOLD = Style.BRIGHT


def print_colored(message, color=Colors.OKBLUE):
    """Print colored message to terminal"""
    print(f"{color}{message}{Colors.ENDC}")


def print_banner():
    banner = """
    ╔════════════════════════════════════════════════════════════╗
    ║             Warped-Product Map Verification                ║
    ║                                                            ║
    ║  Scenario → Geodesics → Residual checks → Report + Traces  ║
    ╚════════════════════════════════════════════════════════════╝
    """
    print_colored(banner, Colors.HEADER)


def configure_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else getattr(logging, settings.LOG_LEVEL, logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s", force=True)


def print_results(run: RunResult) -> None:
    print_colored(f"\nScenario {run.scenario} on {run.source} with map {run.map} (seed {run.seed})", Colors.BOLD)
    if run.calibration:
        print_colored(f"Laplacian convention: {run.calibration['laplacian']}", Colors.OKCYAN)
    for result in run.results:
        residual = f"{result.max_residual:.3e}" if result.max_residual is not None else "n/a"
        line = f"  {result.name:<32} max residual {residual:>10}  tolerance {result.tolerance:.0e}"
        if result.error:
            print_colored(f"✗ {line}  error: {result.error}", Colors.FAIL)
        elif result.passed:
            print_colored(f"✓ {line}", Colors.OKGREEN)
        else:
            print_colored(f"✗ {line}", Colors.FAIL)
    summary = run.summary
    color = Colors.OKGREEN if summary["all_passed"] else Colors.FAIL
    print_colored(f"\n{summary['passed']}/{summary['checks']} checks passed", color)


def command_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario, args.set)
        pipeline = VerificationPipeline(scenario, seed=args.seed, show_progress=sys.stderr.isatty())
        run = asyncio.run(pipeline.run())
    except ConfigError as e:
        print_colored(f"Configuration error: {e}", Colors.FAIL)
        return EXIT_CONFIG_ERROR

    output_dir = args.out or scenario.output.dir or os.path.join(settings.OUTPUT_DIR, scenario.name)
    paths = write_run(run, output_dir, traces=scenario.output.traces)
    print_results(run)
    print_colored(f"Report: {paths['report']}", Colors.OKBLUE)
    if paths["traces"]:
        print_colored(f"Traces: {len(paths['traces'])} files in {os.path.dirname(paths['traces'][0])}", Colors.OKBLUE)
    return EXIT_OK if run.all_passed else EXIT_CHECK_FAILED


def command_list(args) -> int:
    print(list_catalog())
    print("Checks:")
    for name in list_checks():
        print(f"  {name}")
    return EXIT_OK


def command_describe(args) -> int:
    try:
        print(describe_check(args.check))
    except UnknownCheck as e:
        print_colored(str(e), Colors.FAIL)
        return EXIT_CONFIG_ERROR
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Verify warped-product Riemannian maps against numerical oracles",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run the checks of a scenario file")
    run.add_argument("scenario", help="Path to a .scenario (TOML) file")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override a scenario key (dotted path)")
    run.add_argument("--out", help="Output directory (default: WARPLAB_OUTPUT_DIR/<scenario name>)")
    run.add_argument("--seed", type=int, help="Seed for every random sample of the run")
    run.add_argument("--verbose", action="store_true", help="Debug logging")
    run.add_argument("--quiet", action="store_true", help="Skip the banner")
    run.set_defaults(handler=command_run)

    listing = subparsers.add_parser("list", help="List manifolds, presets and checks")
    listing.set_defaults(handler=command_list)

    describe = subparsers.add_parser("describe", help="Describe one check")
    describe.add_argument("check", help="Check name or alias, e.g. clairaut, thm32 or sectional:fiber-plane")
    describe.set_defaults(handler=command_describe)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    colorama_init()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG_ERROR if e.code else EXIT_OK
    configure_logging(getattr(args, "verbose", False))
    if args.command == "run" and not args.quiet:
        print_banner()
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
