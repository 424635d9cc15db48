"""
Forward state solver.

D^alpha x = A x + B u with I^(1-alpha) x(0) = x0 is solved through its
Volterra form. The singular mode c t^(alpha-1), c = x0 / Gamma(alpha), is
carried analytically; the regular remainder y = x - c t^(alpha-1) satisfies

    y(t) = A x0 t^(2 alpha - 1) / Gamma(2 alpha) + I^alpha[A y + B u](t),  y(0) = 0

and is computed by product integration with implicit steps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.special import gamma

from .errors import SolverError
from .kernels import ConvolutionWeights, UniformGrid, build_weights
from .model import Network, build_system_matrices

if TYPE_CHECKING:
    from .scenario import Scenario

logger = logging.getLogger("frachk")

# Step matrices worse conditioned than this are treated as singular
MAX_STEP_CONDITION = 1e12

BOUND_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """
    Leader control samples u_k for k = 0..n with ||u_k|| <= bound.

    Args:
        grid: Grid the samples live on
        samples: Array of shape (n + 1, d)
        bound: Radius K of the admissible ball
    """

    grid: UniformGrid
    samples: np.ndarray
    bound: float

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[0] != self.grid.n + 1:
            raise ValueError(
                f"Control needs {self.grid.n + 1} samples of shape (d,), got array {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            node = int(np.argmin(np.isfinite(samples).all(axis=1)))
            raise ValueError(f"Control sample at node {node} is not finite")
        norms = np.linalg.norm(samples, axis=1)
        if np.any(norms > self.bound + BOUND_SLACK):
            node = int(np.argmax(norms))
            raise ValueError(
                f"Control norm {norms[node]:.6g} at node {node} exceeds the bound K={self.bound}"
            )
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @classmethod
    def zeros(cls, grid: UniformGrid, dim: int, bound: float) -> "ControlSignal":
        return cls(grid, np.zeros((grid.n + 1, dim)), bound)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    """
    x(t) = singular_coeff * t^(alpha - 1) + regular(t) on the grid.

    ``regular`` has shape (n + 1, (N + 1) d); its node-0 row is the remainder
    at t = 0, which is zero for solver output.
    """

    grid: UniformGrid
    alpha: float
    singular_coeff: np.ndarray
    regular: np.ndarray
    network: Network
    scheme: str = "trapezoid"

    def __post_init__(self) -> None:
        size = self.network.state_size
        coeff = np.array(self.singular_coeff, dtype=float).reshape(-1)
        regular = np.array(self.regular, dtype=float)
        if coeff.shape != (size,):
            raise ValueError(f"singular_coeff must have length {size}, got {coeff.size}")
        if regular.shape != (self.grid.n + 1, size):
            raise ValueError(
                f"regular samples must have shape {(self.grid.n + 1, size)}, got {regular.shape}"
            )
        if not (np.all(np.isfinite(coeff)) and np.all(np.isfinite(regular))):
            raise ValueError("State samples must be finite")
        coeff.setflags(write=False)
        regular.setflags(write=False)
        object.__setattr__(self, "singular_coeff", coeff)
        object.__setattr__(self, "regular", regular)

    @property
    def dim(self) -> int:
        return self.network.dim

    @property
    def is_singular(self) -> bool:
        return bool(np.any(self.singular_coeff != 0))

    def values(self) -> np.ndarray:
        """Full state x(t_k) for k = 1..n, shape (n, (N + 1) d)."""
        t = self.grid.nodes[1:]
        return self.regular[1:] + np.outer(t ** (self.alpha - 1), self.singular_coeff)

    def terminal(self) -> np.ndarray:
        """Stacked state at t = T, shape (N + 1, d)."""
        return sample_state(self, self.grid.n)


def sample_state(traj: StateTrajectory, k: int) -> np.ndarray:
    """
    Reconstruct the stacked state x(t_k), singular term included.

    Args:
        traj: State trajectory
        k: Node index, 1..n (0 only when the singular coefficient vanishes)

    Returns:
        Array of shape (N + 1, d)

    Raises:
        ValueError: If k is out of range or hits the t^(alpha-1) singularity at t = 0
    """
    if not 0 <= k <= traj.grid.n:
        raise ValueError(f"Node index {k} outside 0..{traj.grid.n}")
    if k == 0:
        if traj.is_singular:
            raise ValueError(
                "x(0) is unbounded: the state carries a t^(alpha-1) singular mode at t = 0"
            )
        flat = traj.regular[0]
    else:
        flat = traj.regular[k] + traj.grid.nodes[k] ** (traj.alpha - 1) * traj.singular_coeff
    return flat.reshape(traj.network.blocks, traj.dim)


def integrate_volterra(
    matrix: np.ndarray,
    weights: ConvolutionWeights,
    forcing: np.ndarray,
    inputs: np.ndarray,
) -> np.ndarray:
    """
    Solve y_k = forcing_k + sum_j w[k, j] (M y_j + inputs_j) with y_0 = forcing_0.

    The node-k equation (I - w[k, k] M) y_k = rhs is solved with one LU factorisation
    shared by every node.

    Args:
        matrix: Square system matrix M
        weights: Product-integration weights on the solve grid
        forcing: Known forcing samples, shape (n + 1, D)
        inputs: Known input samples entering the integral, shape (n + 1, D)

    Returns:
        Samples y, shape (n + 1, D)

    Raises:
        SolverError: If the step matrix is singular or the solution blows up
    """
    grid = weights.grid
    size = matrix.shape[0]
    step_matrix = np.eye(size) - weights.diagonal * matrix
    condition = np.linalg.cond(step_matrix)
    if not np.isfinite(condition) or condition > MAX_STEP_CONDITION:
        raise SolverError(
            f"Step matrix I - w*A is singular (h={grid.step:.3g}, "
            f"||A||={np.linalg.norm(matrix, 2):.3g}); refine the grid"
        )
    factor = lu_factor(step_matrix)

    y = np.zeros((grid.n + 1, size))
    integrand = np.zeros((grid.n + 1, size))
    y[0] = forcing[0]
    integrand[0] = matrix @ y[0] + inputs[0]
    for k in range(1, grid.n + 1):
        rhs = forcing[k] + weights.history(integrand, k) + weights.diagonal * inputs[k]
        y[k] = lu_solve(factor, rhs, check_finite=False)
        if not np.all(np.isfinite(y[k])):
            raise SolverError(
                f"Solution is not finite at node {k} (t={grid.nodes[k]:.6g}); refine the grid"
            )
        integrand[k] = matrix @ y[k] + inputs[k]
    return y


def volterra_residual(
    matrix: np.ndarray,
    weights: ConvolutionWeights,
    forcing: np.ndarray,
    inputs: np.ndarray,
    y: np.ndarray,
) -> np.ndarray:
    """Per-node max residual of the discrete Volterra equation solved by integrate_volterra."""
    integrand = y @ matrix.T + inputs
    residual = np.zeros(weights.grid.n + 1)
    residual[0] = np.max(np.abs(y[0] - forcing[0]))
    for k in range(1, weights.grid.n + 1):
        total = weights.row(k) @ integrand[: k + 1]
        residual[k] = np.max(np.abs(y[k] - forcing[k] - total))
    return residual


def integrate_volterra_transpose(
    matrix: np.ndarray,
    weights: ConvolutionWeights,
    sensitivity: np.ndarray,
) -> np.ndarray:
    """
    Transpose of integrate_volterra: the gradient of sum_k s_k . y_k with respect to inputs_j.

    With y = integrate_volterra(matrix, weights, forcing, inputs) and
    mu_k = s_k + M^T psi_k, the result is psi_j = sum_{k >= j} w[k, j] mu_k,
    computed from node n down to node 0 with the transposed step matrix.

    Args:
        matrix: Square system matrix M of the forward solve
        weights: Weights of the forward solve
        sensitivity: Samples s_k = d(objective)/d(y_k), shape (n + 1, D); row 0 is ignored

    Returns:
        psi, shape (n + 1, D)

    Raises:
        SolverError: If the step matrix is singular or the result blows up
    """
    grid = weights.grid
    n = grid.n
    size = matrix.shape[0]
    step_matrix = np.eye(size) - weights.diagonal * matrix.T
    condition = np.linalg.cond(step_matrix)
    if not np.isfinite(condition) or condition > MAX_STEP_CONDITION:
        raise SolverError(
            f"Step matrix I - w*A^T is singular (h={grid.step:.3g}, "
            f"||A||={np.linalg.norm(matrix, 2):.3g}); refine the grid"
        )
    factor = lu_factor(step_matrix)

    psi = np.zeros((n + 1, size))
    mu = np.zeros((n + 1, size))
    for j in range(n, 0, -1):
        rhs = weights.lag[1 : n - j + 1] @ mu[j + 1 :] + weights.diagonal * sensitivity[j]
        psi[j] = lu_solve(factor, rhs, check_finite=False)
        if not np.all(np.isfinite(psi[j])):
            raise SolverError(
                f"Adjoint solution is not finite at node {j} (t={grid.nodes[j]:.6g}); refine the grid"
            )
        mu[j] = sensitivity[j] + matrix.T @ psi[j]
    psi[0] = weights.start[1:] @ mu[1:]
    return psi


def singular_forcing(matrix: np.ndarray, x0: np.ndarray, grid: UniformGrid, alpha: float) -> np.ndarray:
    """Samples of M x0 t^(2 alpha - 1) / Gamma(2 alpha); zero at t = 0."""
    t = grid.nodes
    profile = np.zeros_like(t)
    profile[1:] = t[1:] ** (2 * alpha - 1) / gamma(2 * alpha)
    return np.outer(profile, matrix @ x0)


def solve_forward(
    scenario: "Scenario",
    control: ControlSignal,
    weights: Optional[ConvolutionWeights] = None,
) -> StateTrajectory:
    """
    Integrate the leader-agent system for a given control.

    Args:
        scenario: Problem data (network, order, initial data, grid)
        control: Leader control on the scenario grid
        weights: Precomputed weights for the scenario grid and scheme

    Returns:
        State trajectory

    Raises:
        ValueError: If the control lives on another grid or has the wrong dimension
        SolverError: On a singular step matrix or non-finite blow-up
    """
    grid = scenario.grid
    if control.grid != grid:
        raise ValueError(f"Control grid (T={control.grid.horizon}, n={control.grid.n}) does not match scenario grid")
    if control.dim != scenario.network.dim:
        raise ValueError(f"Control has dimension {control.dim}, expected {scenario.network.dim}")
    if weights is None:
        weights = build_weights(scenario.alpha, grid, scenario.scheme)

    system = build_system_matrices(scenario.network)
    x0 = scenario.x0.reshape(-1)
    forcing = singular_forcing(system.A, x0, grid, scenario.alpha)
    inputs = control.samples @ system.B.T

    logger.debug(f"Forward solve: alpha={scenario.alpha}, n={grid.n}, scheme={weights.scheme}")
    regular = integrate_volterra(system.A, weights, forcing, inputs)
    return StateTrajectory(
        grid=grid,
        alpha=scenario.alpha,
        singular_coeff=x0 / gamma(scenario.alpha),
        regular=regular,
        network=scenario.network,
        scheme=weights.scheme,
    )


def solve_uncontrolled(scenario: "Scenario") -> StateTrajectory:
    """
    Leaderless comparison dynamics: couplings removed, leader block kept at zero.

    Args:
        scenario: Problem data; its leader data and couplings are ignored

    Returns:
        State trajectory with the same stacked layout as solve_forward
    """
    x0 = scenario.x0.copy()
    x0[0] = 0.0
    leaderless = scenario.replace(network=scenario.network.without_leader(), x0=x0)
    logger.info(f"Uncontrolled solve for '{scenario.name}' (n={scenario.n})")
    return solve_forward(leaderless, ControlSignal.zeros(scenario.grid, scenario.network.dim, scenario.bound))
