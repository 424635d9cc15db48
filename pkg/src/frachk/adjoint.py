"""
Costate solver for the right-sided terminal-value problem

    D^alpha_{T-} lambda = A^T lambda + G x,    I^(1-alpha)_{T-} lambda (T) = 0,

solved as lambda = I^alpha_{T-}[A^T lambda + G x] by reflecting t -> T - t and
reusing the forward Volterra stepper.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gamma

from .kernels import ConvolutionWeights, UniformGrid, build_weights, right_power_integral
from .forward import StateTrajectory, integrate_volterra
from .model import Network, build_system_matrices, cost_hessian

logger = logging.getLogger("frachk")


@dataclass(frozen=True, eq=False)
class CostateTrajectory:
    """Costate samples lambda_k, k = 0..n, shape (n + 1, (N + 1) d); solve_adjoint leaves lambda_n = 0."""

    grid: UniformGrid
    alpha: float
    samples: np.ndarray
    dim: int

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[0] != self.grid.n + 1:
            raise ValueError(f"Costate needs {self.grid.n + 1} sample rows, got array {samples.shape}")
        if samples.shape[1] % self.dim:
            raise ValueError(f"Costate width {samples.shape[1]} is not a multiple of d={self.dim}")
        if not np.all(np.isfinite(samples)):
            node = int(np.argmin(np.isfinite(samples).all(axis=1)))
            raise ValueError(f"Costate sample at node {node} is not finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def leader(self) -> np.ndarray:
        """Leader block lambda_0 at every node, shape (n + 1, d)."""
        return self.samples[:, : self.dim]

    def block(self, k: int) -> np.ndarray:
        """Stacked costate at node k, shape (N + 1, d)."""
        return self.samples[k].reshape(-1, self.dim)


def solve_backward(
    matrix: np.ndarray,
    weights: ConvolutionWeights,
    forcing: np.ndarray,
    source: np.ndarray,
) -> np.ndarray:
    """
    Solve lambda_k = forcing_k + I^alpha_{T-}[M lambda + source](t_k) on the grid.

    Node n is the start of the mirrored problem, so lambda_n = forcing_n.

    Args:
        matrix: Square system matrix M (A^T for the costate)
        weights: Left-integral weights, shared with the forward solve
        forcing: Known forcing samples, shape (n + 1, D)
        source: Known source samples inside the integral, shape (n + 1, D)

    Returns:
        Samples, shape (n + 1, D)
    """
    mirrored = integrate_volterra(matrix, weights, forcing[::-1], source[::-1])
    return mirrored[::-1].copy()


def solve_adjoint(
    state: StateTrajectory,
    net: Network,
    weights: Optional[ConvolutionWeights] = None,
) -> CostateTrajectory:
    """
    Solve the costate equation along a state trajectory.

    The source G x splits into G c s^(alpha-1), integrated exactly against the
    right kernel, and G y, integrated by product integration.

    Args:
        state: Output of solve_forward
        net: Network the state was computed on
        weights: Weights for the state grid and scheme

    Returns:
        Costate trajectory with lambda_n = 0

    Raises:
        ValueError: If alpha <= 1/2, the network does not match, or the weights
            belong to another grid
        SolverError: On a singular step matrix or non-finite blow-up
    """
    if not state.alpha > 0.5:
        raise ValueError(
            f"Costate source is square-integrable only for alpha in (1/2, 1), got {state.alpha}"
        )
    if net.state_size != state.network.state_size or net.dim != state.dim:
        raise ValueError(
            f"Network has {net.agents} agents of dimension {net.dim}; "
            f"state has width {state.network.state_size} with d={state.dim}"
        )
    grid = state.grid
    if weights is None:
        weights = build_weights(state.alpha, grid, state.scheme)
    elif weights.grid != grid:
        raise ValueError(f"Weights grid (n={weights.grid.n}) does not match state grid (n={grid.n})")

    system = build_system_matrices(net)
    hessian = cost_hessian(net)
    profile = right_power_integral(grid.nodes, grid.horizon, state.alpha, state.alpha)
    forcing = np.outer(profile, hessian @ state.singular_coeff)
    source = state.regular @ hessian.T

    logger.debug(f"Adjoint solve: alpha={state.alpha}, n={grid.n}, scheme={weights.scheme}")
    samples = solve_backward(system.A.T, weights, forcing, source)
    return CostateTrajectory(grid=grid, alpha=state.alpha, samples=samples, dim=net.dim)


def terminal_condition_residual(costate: CostateTrajectory) -> float:
    """
    Size of I^(1-alpha)_{T-}[lambda](T), evaluated for the terminal sample held on [0, T].

    Returns:
        ||lambda_n|| T^(1-alpha) / Gamma(2 - alpha)
    """
    beta = 1.0 - costate.alpha
    terminal = float(np.linalg.norm(costate.samples[-1]))
    return terminal * costate.grid.horizon**beta / gamma(beta + 1)
