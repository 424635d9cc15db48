"""
Discrete Riemann-Liouville integrals on uniform grids.

Product integration: the weakly singular kernel (t - s)^(alpha - 1) / Gamma(alpha)
is integrated exactly against a piecewise-constant (rectangle) or piecewise-linear
(trapezoid) interpolant of the sampled integrand.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Literal, Union

import mpmath
import numpy as np
from scipy.special import gamma, hyp2f1

from .config import DEFAULT_CONFIG, SCHEMES

logger = logging.getLogger("frachk")

Scheme = Literal["rectangle", "trapezoid"]


@dataclass(frozen=True)
class FractionalOrder:
    """Order alpha of the Riemann-Liouville derivative, 0 < alpha < 1."""

    alpha: float

    def __post_init__(self) -> None:
        value = float(self.alpha)
        if not math.isfinite(value) or not 0.0 < value < 1.0:
            raise ValueError(f"Fractional order must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, "alpha", value)

    @classmethod
    def for_control(cls, alpha: float) -> "FractionalOrder":
        """Order for the optimal control problem: the optimality conditions need alpha > 1/2."""
        order = cls(alpha)
        if not order.alpha > 0.5:
            raise ValueError(
                f"Optimality conditions hold only for alpha in (1/2, 1), got {order.alpha}"
            )
        return order

    def __float__(self) -> float:
        return self.alpha


OrderLike = Union[float, FractionalOrder]


@dataclass(frozen=True)
class UniformGrid:
    """Nodes t_k = k * h, k = 0..n, on [0, horizon]."""

    horizon: float
    n: int

    def __post_init__(self) -> None:
        horizon = float(self.horizon)
        if not math.isfinite(horizon) or horizon <= 0:
            raise ValueError(f"Horizon must be a positive finite time, got {self.horizon}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"Grid needs n >= 2 cells, got n={self.n}")
        step = horizon / int(self.n)
        if not math.isfinite(step) or step <= 0:
            raise ValueError(f"Grid step is not finite: T={horizon}, n={self.n}")
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "n", int(self.n))

    @property
    def step(self) -> float:
        return self.horizon / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.n + 1, dtype=float) * self.step
        t.setflags(write=False)
        return t

    def refined(self, factor: int = 2) -> "UniformGrid":
        return UniformGrid(self.horizon, self.n * factor)


def _order_value(alpha: OrderLike) -> float:
    value = float(alpha)
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"Integral order must be positive, got {alpha}")
    return value


@dataclass(frozen=True, eq=False)
class ConvolutionWeights:
    """
    Product-integration weights w[k, j] for the left integral of order alpha.

    Interior weights depend only on the lag m = k - j, so a row is assembled from
    three pieces: ``start[k]`` (node 0), ``lag[m]`` (nodes 1..k-1) and
    ``diagonal`` (node k).
    """

    alpha: float
    scheme: str
    grid: UniformGrid
    lag: np.ndarray
    start: np.ndarray
    diagonal: float

    def row(self, k: int) -> np.ndarray:
        """Full weight row for target node k (length k + 1)."""
        if not 0 <= k <= self.grid.n:
            raise ValueError(f"Node index {k} outside 0..{self.grid.n}")
        weights = np.zeros(k + 1)
        if k == 0:
            return weights
        weights[0] = self.start[k]
        weights[1:k] = self.lag[k - 1 : 0 : -1]
        weights[k] += self.diagonal
        return weights

    def history(self, values: np.ndarray, k: int) -> np.ndarray:
        """Sum of w[k, j] * values[j] over j < k."""
        return self.start[k] * values[0] + self.lag[k - 1 : 0 : -1] @ values[1:k]


def build_weights(alpha: OrderLike, grid: UniformGrid, scheme: Scheme = "trapezoid") -> ConvolutionWeights:
    """
    Build product-integration weights for the left Riemann-Liouville integral.

    Args:
        alpha: Integral order (> 0; 1 gives the classical rules)
        grid: Uniform grid on [0, T]
        scheme: "rectangle" (left-point piecewise-constant) or "trapezoid" (piecewise-linear)

    Returns:
        Weights such that sum_j w[k, j] f(t_j) ~ I^alpha[f](t_k)

    Raises:
        ValueError: If the scheme is unknown or the grid is degenerate
    """
    if scheme not in SCHEMES:
        raise ValueError(f"Unknown scheme '{scheme}', expected one of {', '.join(SCHEMES)}")
    if grid.n < 2:
        raise ValueError(f"Grid needs n >= 2 cells, got n={grid.n}")
    if not math.isfinite(grid.step):
        raise ValueError(f"Grid step is not finite: h={grid.step}")
    return _cached_weights(_order_value(alpha), grid, scheme)


@lru_cache(maxsize=32)
def _cached_weights(alpha: float, grid: UniformGrid, scheme: str) -> ConvolutionWeights:
    m = np.arange(grid.n + 1, dtype=float)
    lag = np.zeros(grid.n + 1)

    if scheme == "rectangle":
        scale = grid.step**alpha / gamma(alpha + 1)
        lag[1:] = scale * (m[1:] ** alpha - m[:-1] ** alpha)
        start = lag.copy()
        diagonal = 0.0
    else:
        scale = grid.step**alpha / gamma(alpha + 2)
        p = alpha + 1
        lag[1:-1] = scale * (m[2:] ** p - 2 * m[1:-1] ** p + m[:-2] ** p)
        lag[-1] = scale * ((m[-1] + 1) ** p - 2 * m[-1] ** p + m[-2] ** p)
        start = np.zeros(grid.n + 1)
        start[1:] = scale * (m[:-1] ** p - (m[:-1] - alpha) * m[1:] ** alpha)
        diagonal = float(scale)

    if not (np.all(np.isfinite(lag)) and np.all(np.isfinite(start))):
        raise ValueError(f"Non-finite weights for alpha={alpha}, h={grid.step}")
    if scheme == "rectangle" and np.any(lag[1:] <= 0):
        raise ValueError(f"Rectangle weights underflowed for alpha={alpha}, h={grid.step}")

    lag.setflags(write=False)
    start.setflags(write=False)
    logger.debug(f"Built {scheme} weights: alpha={alpha}, n={grid.n}, h={grid.step:.3g}")
    return ConvolutionWeights(
        alpha=alpha, scheme=scheme, grid=grid, lag=lag, start=start, diagonal=diagonal
    )


def _check_samples(values: np.ndarray, grid: UniformGrid, first: int) -> None:
    if values.shape[0] != grid.n + 1:
        raise ValueError(f"Expected {grid.n + 1} samples, got {values.shape[0]}")
    finite = np.isfinite(values[first:].reshape(grid.n + 1 - first, -1)).all(axis=1)
    if not finite.all():
        node = first + int(np.argmin(finite))
        raise ValueError(f"Non-finite sample at node {node} (t={grid.nodes[node]:.6g})")


def rl_integral_left(
    samples: np.ndarray,
    grid: UniformGrid,
    alpha: OrderLike,
    scheme: Scheme = "trapezoid",
    singular_start: bool = False,
) -> np.ndarray:
    """
    Left Riemann-Liouville integral I^alpha_{0+} of a sampled function.

    Args:
        samples: Values at the n + 1 grid nodes (extra trailing axes allowed)
        grid: Uniform grid
        alpha: Integral order
        scheme: Weight scheme
        singular_start: Integrand is singular at t = 0; node 0 is never read and the
            first cell uses the value at t_1

    Returns:
        Integral values at every node (0 at node 0)

    Raises:
        ValueError: If a sample read by the scheme is not finite
    """
    values = np.asarray(samples, dtype=float)
    first = 1 if singular_start else 0
    _check_samples(values, grid, first)
    weights = build_weights(alpha, grid, scheme)

    flat = values.reshape(grid.n + 1, -1)
    result = np.zeros_like(flat)
    for k in range(1, grid.n + 1):
        row = weights.row(k)
        if singular_start:
            coeffs = row[1:]
            coeffs[0] += row[0]
            result[k] = coeffs @ flat[1 : k + 1]
        else:
            result[k] = row @ flat[: k + 1]
    return result.reshape(values.shape)


def rl_integral_right(
    samples: np.ndarray,
    grid: UniformGrid,
    alpha: OrderLike,
    scheme: Scheme = "trapezoid",
    singular_end: bool = False,
) -> np.ndarray:
    """Right integral I^alpha_{T-}: the left integral of the time-reversed samples, reversed."""
    values = np.asarray(samples, dtype=float)
    mirrored = rl_integral_left(values[::-1], grid, alpha, scheme, singular_start=singular_end)
    return mirrored[::-1]


def left_power_integral(t: np.ndarray, alpha: OrderLike, beta: float) -> np.ndarray:
    """I^alpha_{0+}[s^(beta-1)](t) = Gamma(beta) / Gamma(alpha+beta) * t^(alpha+beta-1)."""
    a = _order_value(alpha)
    t = np.asarray(t, dtype=float)
    return gamma(beta) / gamma(a + beta) * t ** (a + beta - 1)


def right_power_integral(t: np.ndarray, horizon: float, alpha: OrderLike, beta: float) -> np.ndarray:
    """
    I^alpha_{T-}[s^(beta-1)](t) for 0 <= t <= T.

    Closed form through the Gauss hypergeometric function; at t = 0 the integral
    converges only for alpha + beta > 1.
    """
    a = _order_value(alpha)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    gap = horizon - t
    result = np.zeros_like(t)

    inner = (t > 0) & (gap > 0)
    ti, gi = t[inner], gap[inner]
    result[inner] = gi**a * ti ** (beta - 1) / gamma(a + 1) * hyp2f1(1 - beta, a, a + 1, -gi / ti)

    at_zero = t == 0
    if at_zero.any():
        if a + beta - 1 > 0:
            result[at_zero] = horizon ** (a + beta - 1) / ((a + beta - 1) * gamma(a))
        else:
            result[at_zero] = np.inf
    return result


def mittag_leffler(
    alpha: float,
    beta: float,
    z: float,
    budget: float = DEFAULT_CONFIG["mittag_leffler_budget"],
    tol: float = 1e-16,
) -> float:
    """
    Two-parameter Mittag-Leffler function E_{alpha,beta}(z) by its power series.

    Terms z^k / Gamma(alpha k + beta) grow up to a peak and then decrease
    monotonically; past the peak the sum stops once a term drops below
    ``tol`` times the partial sum. The working precision is raised by the
    decimal size of the peak term so alternating cancellation stays exact.

    Raises:
        ValueError: If |z| exceeds the series budget or parameters are invalid
    """
    if not alpha > 0 or not beta > 0:
        raise ValueError(f"Mittag-Leffler parameters must be positive, got alpha={alpha}, beta={beta}")
    if not math.isfinite(z):
        raise ValueError(f"Mittag-Leffler argument must be finite, got {z}")
    if abs(z) > budget:
        raise ValueError(
            f"|z| = {abs(z):.3g} exceeds the series budget {budget:g}; use a smaller horizon"
        )
    if z == 0:
        return float(mpmath.rgamma(beta))

    # Locate the peak term in log space to size the working precision
    log_z = math.log(abs(z))
    peak, peak_index = -math.inf, 0
    k = 0
    while True:
        log_term = k * log_z - math.lgamma(alpha * k + beta)
        if log_term > peak:
            peak, peak_index = log_term, k
        if log_term < peak - 40 * math.log(10) or (k > 0 and log_term < -800):
            break
        k += 1
    extra_digits = max(0, int(peak / math.log(10)) + 1)

    with mpmath.workdps(20 + extra_digits):
        zm = mpmath.mpf(z)
        # alpha k + beta must be formed at working precision, not in float64
        am, bm = mpmath.mpf(alpha), mpmath.mpf(beta)
        total = mpmath.mpf(0)
        power = mpmath.mpf(1)
        k = 0
        while True:
            term = power * mpmath.rgamma(am * k + bm)
            total += term
            if k > peak_index and abs(term) <= tol * abs(total):
                break
            k += 1
            power *= zm
            if k > 100_000:
                raise ValueError(f"Mittag-Leffler series did not converge for z={z}")
        return float(total)
