"""Command-line entry point for frachk."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

# Support both direct execution (PyInstaller bundle) and module import
if __name__ == "__main__" and __package__ is None:
    sys.path.insert(0, str(Path(__file__).parent.parent))
    from frachk.config import load_config
    from frachk.errors import ScenarioError, SolverError
    from frachk.kernels import FractionalOrder
    from frachk.logging_ import setup_logging
    from frachk.runner import MODES, run
    from frachk.scenario import BUNDLED_SCENARIOS, load_bundled, parse_scenario
else:
    from .config import load_config
    from .errors import ScenarioError, SolverError
    from .kernels import FractionalOrder
    from .logging_ import setup_logging
    from .runner import MODES, run
    from .scenario import BUNDLED_SCENARIOS, load_bundled, parse_scenario

logger = logging.getLogger("frachk")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_SOLVER = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frachk",
        description="Optimal leader control for fractional Hegselmann-Krause consensus",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  frachk run scenario.json --mode compare --out runs/my-scenario
  frachk run scenario.json --grid 512 --force
  frachk demo example1
  frachk demo example2 --alpha 0.9
  frachk validate scenario.json
        """,
    )
    parser.add_argument(
        "--debug",
        action="store_true",
        help="Enable debug logging to console",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Solve a scenario file and write CSV/JSON artifacts")
    run_parser.add_argument("file", help="Scenario JSON file")
    run_parser.add_argument(
        "--mode",
        choices=MODES,
        default="compare",
        help="controlled (sweep), uncontrolled (leaderless), or compare (both, default)",
    )
    run_parser.add_argument("--out", help="Output directory (default: <output_dir>/<scenario name>)")
    run_parser.add_argument("--grid", type=int, help="Grid node count n (overrides the scenario)")
    run_parser.add_argument("--alpha", type=float, help="Fractional order in (1/2, 1) (overrides the scenario)")
    run_parser.add_argument("--force", action="store_true", help="Overwrite existing artifacts")

    demo_parser = commands.add_parser("demo", help="Run a bundled scenario in compare mode")
    demo_parser.add_argument("name", choices=BUNDLED_SCENARIOS)
    demo_parser.add_argument("--out", help="Output directory (default: <output_dir>/<name>)")
    demo_parser.add_argument("--grid", type=int, help="Grid node count n (overrides the scenario)")
    demo_parser.add_argument("--alpha", type=float, help="Fractional order in (1/2, 1) (overrides the scenario)")
    demo_parser.add_argument("--force", action="store_true", help="Overwrite existing artifacts")

    validate_parser = commands.add_parser("validate", help="Check a scenario file without solving")
    validate_parser.add_argument("file", help="Scenario JSON file")
    return parser


def _with_grid(scenario, grid: Optional[int]):
    if grid is None:
        return scenario
    if grid < 2:
        raise ScenarioError("--grid", f"must be an integer >= 2, got {grid}")
    return scenario.replace(n=grid)


def _with_alpha(scenario, alpha: Optional[float]):
    if alpha is None:
        return scenario
    try:
        order = FractionalOrder.for_control(alpha)
    except ValueError as e:
        raise ScenarioError("--alpha", str(e)) from e
    return scenario.replace(alpha=order.alpha)


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Main CLI entry point."""
    args = build_parser().parse_args(argv)
    setup_logging(debug=args.debug)

    try:
        config = load_config()

        if args.command == "validate":
            scenario = parse_scenario(args.file, config)
            print(
                f"OK: {scenario.name} is valid (N={scenario.network.agents}, "
                f"d={scenario.network.dim}, alpha={scenario.alpha}, n={scenario.n})",
                file=sys.stdout,
            )
            sys.exit(EXIT_OK)

        if args.command == "demo":
            scenario = load_bundled(args.name, config)
            mode = "compare"
        else:
            scenario = parse_scenario(args.file, config)
            mode = args.mode
        scenario = _with_alpha(_with_grid(scenario, args.grid), args.alpha)

        run_name = scenario.name if args.alpha is None else f"{scenario.name}-alpha{scenario.alpha:g}"
        out_dir = Path(args.out) if args.out else Path(config["output_dir"]) / run_name
        artifacts = run(scenario, mode, out_dir, force=args.force, config=config)
        summary = artifacts.summary

        print(f"OK: {scenario.name} ({mode}) written to {out_dir}", file=sys.stdout)
        if summary["cost"] is not None:
            print(
                f"  cost {summary['cost']:.6g} (u = 0: {summary['cost_zero_control']:.6g}), "
                f"iterations {summary['iterations']}, converged {summary['converged']}",
                file=sys.stdout,
            )
        if summary["diameter_ratio"] is not None:
            print(
                f"  terminal diameter {summary['terminal_diameter_controlled']:.6g} controlled vs "
                f"{summary['terminal_diameter_uncontrolled']:.6g} uncontrolled",
                file=sys.stdout,
            )
        sys.exit(EXIT_OK)

    except (ScenarioError, FileExistsError, ValueError) as e:
        logger.error(f"Validation error: {e}")
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(EXIT_VALIDATION)
    except SolverError as e:
        logger.error(f"Solver error: {e}")
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(EXIT_SOLVER)
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        print(f"Unexpected error: {e}", file=sys.stderr)
        sys.exit(EXIT_FAILURE)


if __name__ == "__main__":
    main()
