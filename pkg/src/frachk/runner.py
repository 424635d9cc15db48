"""Run modes: controlled sweep, uncontrolled comparison, or both."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from .adjoint import solve_adjoint, terminal_condition_residual
from .config import DEFAULT_CONFIG
from .errors import SolverError
from .forward import StateTrajectory, solve_uncontrolled
from .model import consensus_diameter
from .output import emit_csv, write_summary
from .scenario import Scenario
from .sweep import OptimalSolution, pmp_pointwise_check, sweep

logger = logging.getLogger("frachk")

MODES = ("controlled", "uncontrolled", "compare")

STATE_CSV = "state.csv"
COSTATE_CSV = "costate.csv"
CONTROL_CSV = "control.csv"
UNCONTROLLED_CSV = "uncontrolled_state.csv"
SUMMARY_JSON = "summary.json"


@dataclass
class RunArtifacts:
    """Paths written by a run (None when the mode does not produce the file) and its summary."""

    summary_path: Path
    state: Optional[Path] = None
    costate: Optional[Path] = None
    control: Optional[Path] = None
    uncontrolled_state: Optional[Path] = None
    summary: dict[str, Any] = field(default_factory=dict)


def _targets(mode: str, out_dir: Path) -> dict[str, Path]:
    names = {"summary_path": SUMMARY_JSON}
    if mode in ("controlled", "compare"):
        names.update(state=STATE_CSV, costate=COSTATE_CSV, control=CONTROL_CSV)
    if mode in ("uncontrolled", "compare"):
        names["uncontrolled_state"] = UNCONTROLLED_CSV
    return {key: out_dir / name for key, name in names.items()}


def _terminal_diameter(state: StateTrajectory) -> float:
    return consensus_diameter(state.terminal())


def run(
    scenario: Scenario,
    mode: str,
    out_dir: Union[str, Path],
    force: bool = False,
    config: Optional[dict[str, Any]] = None,
) -> RunArtifacts:
    """
    Solve a scenario in one of the run modes and write its artifacts.

    Args:
        scenario: Validated scenario
        mode: "controlled", "uncontrolled" or "compare"
        out_dir: Output directory (created if missing)
        force: Overwrite existing artifacts
        config: App config (``pmp_check_samples``, ``parallel_compare``)

    Returns:
        Written paths and the summary dictionary

    Raises:
        ValueError: If the mode is unknown
        FileExistsError: If an artifact exists and force is not set
        SolverError: If a solver fails or rejects its input (message prefixed with the scenario name)
    """
    if mode not in MODES:
        raise ValueError(f"Unknown mode '{mode}', expected one of {', '.join(MODES)}")
    config = config if config is not None else DEFAULT_CONFIG
    out_dir = Path(out_dir)
    targets = _targets(mode, out_dir)
    if not force:
        existing = [path for path in targets.values() if path.exists()]
        if existing:
            raise FileExistsError(f"{existing[0]} already exists; use --force to overwrite")

    logger.info(f"Run '{scenario.name}' in {mode} mode -> {out_dir}")
    try:
        solution, uncontrolled = _solve(scenario, mode, config)
        residual = (
            terminal_condition_residual(solve_adjoint(solution.state, scenario.network))
            if solution is not None
            else None
        )
    except (SolverError, ValueError) as e:
        raise SolverError(f"scenario '{scenario.name}': {e}") from e

    summary: dict[str, Any] = {
        "scenario": scenario.name,
        "mode": mode,
        "alpha": scenario.alpha,
        "n": scenario.n,
        "T": scenario.horizon,
        "terminal_diameter_controlled": None,
        "terminal_diameter_uncontrolled": None,
        "diameter_ratio": None,
        "cost": None,
        "cost_zero_control": None,
        "iterations": None,
        "converged": None,
        "stalled": None,
        "terminal_residual": None,
        "pmp_violation": None,
        "singular_coefficients": None,
    }
    artifacts = RunArtifacts(summary_path=targets["summary_path"])

    if solution is not None:
        report = solution.report
        blocks = solution.state.singular_coeff.reshape(scenario.network.blocks, scenario.network.dim)
        summary.update(
            terminal_diameter_controlled=_terminal_diameter(solution.state),
            cost=solution.cost,
            cost_zero_control=report.cost_zero_control,
            iterations=report.iterations,
            converged=report.converged,
            stalled=report.stalled,
            terminal_residual=residual,
            pmp_violation=pmp_pointwise_check(
                solution,
                scenario.network,
                scenario.cost_params,
                samples=config.get("pmp_check_samples", DEFAULT_CONFIG["pmp_check_samples"]),
            ),
            singular_coefficients=blocks.tolist(),
        )
        artifacts.state = emit_csv(solution.state, targets["state"])
        artifacts.costate = emit_csv(solution.costate, targets["costate"])
        artifacts.control = emit_csv(solution.control, targets["control"])
        if not report.converged:
            logger.warning(f"Scenario '{scenario.name}': sweep did not converge")

    if uncontrolled is not None:
        summary["terminal_diameter_uncontrolled"] = _terminal_diameter(uncontrolled)
        if summary["singular_coefficients"] is None:
            blocks = uncontrolled.singular_coeff.reshape(scenario.network.blocks, scenario.network.dim)
            summary["singular_coefficients"] = blocks.tolist()
        artifacts.uncontrolled_state = emit_csv(uncontrolled, targets["uncontrolled_state"])

    controlled = summary["terminal_diameter_controlled"]
    free = summary["terminal_diameter_uncontrolled"]
    if controlled is not None and free:
        summary["diameter_ratio"] = controlled / free

    write_summary(summary, artifacts.summary_path)
    artifacts.summary = summary
    return artifacts


def _solve(
    scenario: Scenario, mode: str, config: dict[str, Any]
) -> tuple[Optional[OptimalSolution], Optional[StateTrajectory]]:
    if mode == "controlled":
        return sweep(scenario), None
    if mode == "uncontrolled":
        return None, solve_uncontrolled(scenario)
    if config.get("parallel_compare", True):
        with ThreadPoolExecutor(max_workers=2) as pool:
            controlled = pool.submit(sweep, scenario)
            uncontrolled = pool.submit(solve_uncontrolled, scenario)
            return controlled.result(), uncontrolled.result()
    return sweep(scenario), solve_uncontrolled(scenario)
