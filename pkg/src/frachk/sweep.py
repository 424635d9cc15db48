"""
Forward-backward sweep for the leader control problem.

Each iteration solves the state forward and the discrete costate backward
(the exact gradient of the evaluated cost), minimises the Hamiltonian
pointwise in closed form and relaxes the control toward that minimiser with
a backtracking line search on the cost.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .adjoint import CostateTrajectory
from .config import DEFAULT_CONFIG
from .errors import SolverError
from .forward import (
    ControlSignal,
    StateTrajectory,
    integrate_volterra_transpose,
    sample_state,
    solve_forward,
)
from .kernels import ConvolutionWeights, build_weights
from .model import (
    CostParams,
    Network,
    build_system_matrices,
    cost_hessian,
    cost_integrand,
    drift,
)

if TYPE_CHECKING:
    from .scenario import Scenario

logger = logging.getLogger("frachk")

HAMILTONIAN_POINTS = 10_000


@dataclass(frozen=True)
class SweepConfig:
    """
    Relaxation theta, backtracking floor theta_min, iteration cap and control tolerance.
    """

    relaxation: float = DEFAULT_CONFIG["sweep"]["relaxation"]
    max_iterations: int = DEFAULT_CONFIG["sweep"]["max_iterations"]
    tolerance: float = DEFAULT_CONFIG["sweep"]["tolerance"]
    min_relaxation: float = DEFAULT_CONFIG["sweep"]["min_relaxation"]

    def __post_init__(self) -> None:
        if not 0 < self.min_relaxation <= self.relaxation <= 1:
            raise ValueError(
                f"Need 0 < min_relaxation <= relaxation <= 1, got "
                f"min_relaxation={self.min_relaxation}, relaxation={self.relaxation}"
            )
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be a positive integer, got {self.max_iterations}")
        if not (math.isfinite(self.tolerance) and self.tolerance > 0):
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")

    @classmethod
    def from_config(cls, config: dict[str, Any]) -> "SweepConfig":
        """Build from the ``sweep`` section of the app config."""
        sweep = config.get("sweep", DEFAULT_CONFIG["sweep"])
        return cls(
            relaxation=float(sweep["relaxation"]),
            max_iterations=int(sweep["max_iterations"]),
            tolerance=float(sweep["tolerance"]),
            min_relaxation=float(sweep["min_relaxation"]),
        )


@dataclass
class SweepReport:
    """What the sweep did: one cost per accepted iterate, starting with u = 0."""

    iterations: int = 0
    cost_history: list[float] = field(default_factory=list)
    relaxations: list[float] = field(default_factory=list)
    final_change: float = math.inf
    converged: bool = False
    stalled: bool = False
    cost_zero_control: float = math.nan


@dataclass(frozen=True, eq=False)
class OptimalSolution:
    state: StateTrajectory
    costate: CostateTrajectory
    control: ControlSignal
    cost: float
    report: SweepReport


def pmp_control(lambda0: np.ndarray, nu: float, bound: float) -> np.ndarray:
    """
    Minimiser of (nu/2)|u|^2 + <lambda0, u> over the ball |u| <= bound.

    Works on a single vector of shape (d,) or on stacked rows of shape (..., d).

    Returns:
        -lambda0 / nu inside the ball, -bound * lambda0 / |lambda0| when saturated
    """
    lam = np.asarray(lambda0, dtype=float)
    scalar = lam.ndim == 0
    lam = np.atleast_1d(lam)
    norms = np.linalg.norm(lam, axis=-1, keepdims=True)
    saturated = norms > nu * bound
    u = np.where(saturated, -bound * lam / np.where(saturated, norms, 1.0), -lam / nu)
    return u[0] if scalar else u


def evaluate_cost(state: StateTrajectory, control: ControlSignal, params: CostParams) -> float:
    """
    Cost functional of a state-control pair.

    The state term x.G.x / 2 is integrated exactly on [0, t_1] for
    x = c s^(alpha-1) + (linear remainder) and by the trapezoid rule on
    [t_1, T]; the control term uses the trapezoid rule on [0, T].

    Raises:
        ValueError: If alpha <= 1/2 (the state term diverges at t = 0)
    """
    alpha = state.alpha
    if not alpha > 0.5:
        raise ValueError(f"Cost is finite only for alpha in (1/2, 1), got {alpha}")
    grid = state.grid
    h = grid.step
    hessian = cost_hessian(state.network)

    c = state.singular_coeff
    y0 = state.regular[0]
    delta = state.regular[1] - y0
    gc = hessian @ c
    first_cell = (
        0.5 * c @ gc * h ** (2 * alpha - 1) / (2 * alpha - 1)
        + gc @ y0 * h**alpha / alpha
        + gc @ delta * h**alpha / (alpha + 1)
        + 0.5 * h * (y0 @ hessian @ y0 + y0 @ hessian @ delta + delta @ hessian @ delta / 3)
    )

    values = state.values()
    phi = 0.5 * np.einsum("ki,ij,kj->k", values, hessian, values)
    state_cost = first_cell + trapezoid(phi, dx=h)

    control_energy = np.einsum("ki,ki->k", control.samples, control.samples)
    control_cost = 0.5 * params.nu * trapezoid(control_energy, dx=h)
    return float(state_cost + control_cost)


def state_cost_sensitivity(state: StateTrajectory) -> np.ndarray:
    """
    Gradient of the state term of evaluate_cost with respect to the regular samples y_k.

    Row 0 is zero; y_0 does not depend on the control.
    """
    grid = state.grid
    h = grid.step
    alpha = state.alpha
    hessian = cost_hessian(state.network)
    quadrature = np.full(grid.n, h)
    quadrature[[0, -1]] = h / 2

    sensitivity = np.zeros_like(state.regular)
    sensitivity[1:] = quadrature[:, None] * (state.values() @ hessian)
    y0 = state.regular[0]
    delta = state.regular[1] - y0
    # First cell [0, t_1], integrated exactly
    sensitivity[1] += hessian @ (
        state.singular_coeff * h**alpha / (alpha + 1) + 0.5 * h * (y0 + 2 * delta / 3)
    )
    return sensitivity


def discrete_costate(state: StateTrajectory, weights: ConvolutionWeights) -> CostateTrajectory:
    """
    Costate of the discretised problem.

    lambda_k is the gradient of evaluate_cost with respect to the forward
    solver's input B u_k divided by the control quadrature weight of node k,
    so (nu u_k + lambda_{0,k}) scaled by that weight is the exact cost gradient.
    It approaches solve_adjoint's costate as the grid is refined; its last
    sample is O(h^alpha) instead of zero.
    """
    grid = state.grid
    matrices = build_system_matrices(state.network)
    psi = integrate_volterra_transpose(matrices.A, weights, state_cost_sensitivity(state))
    quadrature = np.full(grid.n + 1, grid.step)
    quadrature[[0, -1]] = grid.step / 2
    return CostateTrajectory(
        grid=grid, alpha=state.alpha, samples=psi / quadrature[:, None], dim=state.network.dim
    )


def _control_change(candidate: np.ndarray, current: np.ndarray) -> float:
    gap = np.linalg.norm(candidate - current, axis=1).max()
    scale = max(1.0, float(np.linalg.norm(current, axis=1).max()))
    return float(gap / scale)


def sweep(scenario: "Scenario", config: Optional[SweepConfig] = None) -> OptimalSolution:
    """
    Run the forward-backward sweep from u = 0.

    Args:
        scenario: Problem data with alpha in (1/2, 1)
        config: Sweep settings (defaults to the scenario's)

    Returns:
        Last accepted state, costate, control and cost with the sweep report

    Raises:
        ValueError: If alpha is outside (1/2, 1)
        SolverError: If a cost evaluation is not finite
    """
    config = config if config is not None else scenario.sweep
    if not 0.5 < scenario.alpha < 1:
        raise ValueError(
            f"Optimality conditions hold only for alpha in (1/2, 1), got {scenario.alpha}"
        )
    net = scenario.network
    params = scenario.cost_params
    grid = scenario.grid
    weights = build_weights(scenario.alpha, grid, scenario.scheme)

    def evaluate(control: ControlSignal, iteration: int) -> tuple[StateTrajectory, float]:
        state = solve_forward(scenario, control, weights)
        cost = evaluate_cost(state, control, params)
        if not math.isfinite(cost):
            raise SolverError(f"Cost is not finite at sweep iteration {iteration}")
        return state, cost

    control = ControlSignal.zeros(grid, net.dim, scenario.bound)
    state, cost = evaluate(control, 0)
    report = SweepReport(cost_history=[cost], cost_zero_control=cost)
    logger.info(
        f"Sweep '{scenario.name}': alpha={scenario.alpha}, n={grid.n}, "
        f"theta={config.relaxation}, tol={config.tolerance:g}, J(0)={cost:.6g}"
    )

    costate = discrete_costate(state, weights)
    for iteration in range(1, config.max_iterations + 1):
        report.iterations = iteration
        candidate = pmp_control(costate.leader, params.nu, scenario.bound)
        step = _control_change(candidate, control.samples)
        report.final_change = config.relaxation * step
        if report.final_change < config.tolerance:
            report.converged = True
            break

        theta = config.relaxation
        accepted = None
        while theta >= config.min_relaxation:
            trial = ControlSignal(
                grid, (1 - theta) * control.samples + theta * candidate, scenario.bound
            )
            trial_state, trial_cost = evaluate(trial, iteration)
            if trial_cost <= cost:
                accepted = (trial, trial_state, trial_cost)
                break
            theta /= 2

        if accepted is None:
            report.stalled = True
            # An undamped change below tolerance would have converged above
            report.final_change = step
            logger.warning(
                f"Sweep '{scenario.name}' stalled at iteration {iteration}: no cost decrease "
                f"down to theta={config.min_relaxation:g} (change {report.final_change:.3g})"
            )
            break

        control, state, cost = accepted
        report.cost_history.append(cost)
        report.relaxations.append(theta)
        costate = discrete_costate(state, weights)
        logger.debug(
            f"Sweep iteration {iteration}: J={cost:.10g}, change={theta * step:.3g}, theta={theta:g}"
        )
    else:
        logger.warning(
            f"Sweep '{scenario.name}' hit max_iterations={config.max_iterations} "
            f"(change {report.final_change:.3g} >= tol {config.tolerance:g})"
        )

    logger.info(
        f"Sweep '{scenario.name}' finished: J={cost:.6g}, iterations={report.iterations}, "
        f"converged={report.converged}"
    )
    return OptimalSolution(state=state, costate=costate, control=control, cost=cost, report=report)


def _hamiltonian_points(dim: int, bound: float, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.linspace(-bound, bound, HAMILTONIAN_POINTS)[:, None]
    directions = rng.standard_normal((HAMILTONIAN_POINTS - 1, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = bound * rng.random(HAMILTONIAN_POINTS - 1) ** (1.0 / dim)
    # Half of the points sit on the sphere, where saturated minimisers live
    radii[::2] = bound
    return np.vstack([np.zeros((1, dim)), directions * radii[:, None]])


def pmp_pointwise_check(
    solution: OptimalSolution,
    net: Network,
    params: CostParams,
    samples: int = DEFAULT_CONFIG["pmp_check_samples"],
    seed: int = 0,
    nodes: Optional[Sequence[int]] = None,
) -> float:
    """
    Brute-force the Hamiltonian minimum condition at sampled grid nodes.

    H(u) = f(x, u) + lambda . g(x, u) is evaluated on a 10^4-point discretisation
    of the control ball and compared with H at the solution's control.

    Args:
        solution: Sweep output
        net: Network of the solved scenario
        params: Cost parameters of the solved scenario
        samples: Number of random nodes from 1..n
        seed: Seed of the node and point sampler
        nodes: Explicit node indices instead of random ones

    Returns:
        Largest max(0, H(u*) - min H) / (1 + |H(u*)|) over the checked nodes
    """
    control = solution.control
    grid = control.grid
    rng = np.random.default_rng(seed)
    if nodes is None:
        count = min(int(samples), grid.n)
        nodes = rng.choice(np.arange(1, grid.n + 1), size=count, replace=False)
    points = _hamiltonian_points(net.dim, control.bound, rng)
    zero = np.zeros(net.dim)

    def violation(k: int) -> float:
        x = sample_state(solution.state, k)
        lam = solution.costate.block(k)
        base = cost_integrand(x, zero, params, net) + float(np.sum(lam * drift(x, zero, net)))
        lam0 = lam[0]

        def hamiltonian(u: np.ndarray) -> np.ndarray:
            return base + 0.5 * params.nu * np.sum(u * u, axis=-1) + u @ lam0

        at_solution = float(hamiltonian(control.samples[k]))
        best = float(hamiltonian(points).min())
        return max(0.0, at_solution - best) / (1.0 + abs(at_solution))

    with ThreadPoolExecutor() as pool:
        violations = list(pool.map(violation, [int(k) for k in nodes]))
    worst = max(violations, default=0.0)
    logger.debug(f"PMP check over {len(violations)} nodes: max scaled violation {worst:.3g}")
    return worst
