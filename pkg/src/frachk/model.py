"""
Hegselmann-Krause dynamics with a controlled virtual leader.

A stacked state is an array of shape (N + 1, d): block 0 is the leader x_0,
blocks 1..N are the agents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.spatial.distance import pdist

StateLike = Union[np.ndarray, Sequence[Sequence[float]], Sequence[float]]


@dataclass(frozen=True, eq=False)
class Network:
    """
    Influence weights a_ij between agents and leader couplings c_i.

    Args:
        weights: N x N non-negative matrix with zero diagonal (units 1/time)
        couplings: Length-N non-negative leader couplings (units 1/time)
        dim: Per-agent state dimension d
    """

    weights: np.ndarray
    couplings: np.ndarray
    dim: int = 1

    def __post_init__(self) -> None:
        a = np.array(self.weights, dtype=float)
        c = np.array(self.couplings, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"weights must be a non-empty square matrix, got shape {a.shape}")
        if c.shape != (a.shape[0],):
            raise ValueError(f"couplings must have length {a.shape[0]}, got shape {c.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c))):
            raise ValueError("weights and couplings must be finite")
        if np.any(a < 0):
            i, j = np.argwhere(a < 0)[0]
            raise ValueError(f"weights[{i}][{j}] is negative ({a[i, j]})")
        if np.any(c < 0):
            i = int(np.argmax(c < 0))
            raise ValueError(f"couplings[{i}] is negative ({c[i]})")
        diagonal = np.diag(a)
        if np.any(diagonal != 0):
            i = int(np.argmax(diagonal != 0))
            raise ValueError(f"weights[{i}][{i}] must be zero (self-influence excluded)")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        a.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "weights", a)
        object.__setattr__(self, "couplings", c)
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def agents(self) -> int:
        return self.weights.shape[0]

    @property
    def blocks(self) -> int:
        return self.agents + 1

    @property
    def state_size(self) -> int:
        return self.blocks * self.dim

    def without_leader(self) -> "Network":
        """Same agent graph with every leader coupling removed."""
        return Network(self.weights, np.zeros_like(self.couplings), self.dim)


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """A ((N+1)d x (N+1)d) and B ((N+1)d x d) of D^alpha x = A x + B u."""

    A: np.ndarray
    B: np.ndarray


@dataclass(frozen=True)
class CostParams:
    """Control penalty weight nu of the running cost."""

    nu: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.nu) and self.nu > 0):
            raise ValueError(f"Control penalty nu must be positive, got {self.nu}")


def as_stacked(x: StateLike, net: Network) -> np.ndarray:
    """
    Coerce a stacked state to shape (N + 1, d).

    Raises:
        ValueError: Naming the offending block on dimension mismatch
    """
    if isinstance(x, np.ndarray) and x.ndim == 2:
        blocks = x.astype(float, copy=False)
        if blocks.shape[0] != net.blocks:
            raise ValueError(
                f"State has {blocks.shape[0]} blocks, expected {net.blocks} "
                f"(leader + {net.agents} agents)"
            )
        if blocks.shape[1] != net.dim:
            raise ValueError(f"Block 0 has dimension {blocks.shape[1]}, expected {net.dim}")
        return blocks

    items = list(x)
    if len(items) != net.blocks:
        raise ValueError(
            f"State has {len(items)} blocks, expected {net.blocks} (leader + {net.agents} agents)"
        )
    blocks = np.empty((net.blocks, net.dim))
    for i, item in enumerate(items):
        block = np.atleast_1d(np.asarray(item, dtype=float))
        if block.shape != (net.dim,):
            raise ValueError(f"Block {i} has dimension {block.size}, expected {net.dim}")
        blocks[i] = block
    return blocks


def _control(u: StateLike, dim: int) -> np.ndarray:
    control = np.atleast_1d(np.asarray(u, dtype=float))
    if control.shape != (dim,):
        raise ValueError(f"Control has dimension {control.size}, expected {dim}")
    return control


def coupling_matrix(net: Network) -> np.ndarray:
    """Scalar (N+1) x (N+1) block pattern of A: zero leader row, s_i on the diagonal."""
    pattern = np.zeros((net.blocks, net.blocks))
    pattern[1:, 0] = net.couplings
    pattern[1:, 1:] = net.weights
    s = -(net.weights.sum(axis=1) + net.couplings)
    pattern[np.arange(1, net.blocks), np.arange(1, net.blocks)] = s
    return pattern


def build_system_matrices(net: Network) -> SystemMatrices:
    """Matrix form of the leader-agent system."""
    identity = np.eye(net.dim)
    A = np.kron(coupling_matrix(net), identity)
    B = np.zeros((net.state_size, net.dim))
    B[: net.dim] = identity
    return SystemMatrices(A=A, B=B)


def drift(x: StateLike, u: StateLike, net: Network) -> np.ndarray:
    """
    Right-hand side g(x, u): block 0 is u, block i is
    sum_j a_ij (x_j - x_i) + c_i (x_0 - x_i).
    """
    blocks = as_stacked(x, net)
    control = _control(u, net.dim)
    agents = blocks[1:]
    result = np.empty_like(blocks)
    result[0] = control
    result[1:] = (
        net.weights @ agents
        - net.weights.sum(axis=1)[:, None] * agents
        + net.couplings[:, None] * (blocks[0] - agents)
    )
    return result


def cost_integrand(x: StateLike, u: StateLike, params: CostParams, net: Network) -> float:
    """
    Running cost (1/2N^2) sum_ij |x_i - x_j|^2 + (1/2) sum_i |x_0 - x_i|^2 + (nu/2)|u|^2.
    """
    blocks = as_stacked(x, net)
    control = _control(u, net.dim)
    agents = blocks[1:]
    n = net.agents
    spread = (agents[:, None, :] - agents[None, :, :]) ** 2
    leader_gap = (blocks[0] - agents) ** 2
    return float(
        spread.sum() / (2 * n * n)
        + 0.5 * leader_gap.sum()
        + 0.5 * params.nu * control @ control
    )


def cost_gradient(x: StateLike, net: Network) -> np.ndarray:
    """Gradient of the running cost in the state, block by block."""
    blocks = as_stacked(x, net)
    agents = blocks[1:]
    n = net.agents
    total = agents.sum(axis=0)
    gradient = np.empty_like(blocks)
    gradient[0] = n * blocks[0] - total
    gradient[1:] = (2.0 / n) * (agents - total / n) + (agents - blocks[0])
    return gradient


def cost_hessian(net: Network) -> np.ndarray:
    """
    Constant Hessian G of the state cost: gradient = G x, state cost = x.G.x / 2
    on the flattened state.
    """
    n = net.agents
    pattern = np.zeros((net.blocks, net.blocks))
    pattern[0, 0] = n
    pattern[0, 1:] = -1.0
    pattern[1:, 0] = -1.0
    pattern[1:, 1:] = (2.0 / n) * (np.eye(n) - 1.0 / n) + np.eye(n)
    return np.kron(pattern, np.eye(net.dim))


def consensus_diameter(x: np.ndarray, include_leader: bool = False) -> float:
    """Largest Euclidean distance between two selected blocks of a stacked state."""
    blocks = np.asarray(x, dtype=float)
    if blocks.ndim == 1:
        blocks = blocks[:, None]
    selected = blocks if include_leader else blocks[1:]
    if selected.shape[0] < 2:
        return 0.0
    return float(pdist(selected).max())
