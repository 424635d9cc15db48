"""Tests for kernels module."""

import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import erfcx, gamma

from frachk.kernels import (
    FractionalOrder,
    UniformGrid,
    build_weights,
    left_power_integral,
    mittag_leffler,
    right_power_integral,
    rl_integral_left,
    rl_integral_right,
)


class TestFractionalOrder:
    """Test derivative order validation."""

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 1.2, -0.3, float("nan")])
    def test_rejects_outside_open_interval(self, alpha):
        with pytest.raises(ValueError, match="Fractional order"):
            FractionalOrder(alpha)

    def test_for_control_requires_half(self):
        with pytest.raises(ValueError, match=r"\(1/2, 1\)"):
            FractionalOrder.for_control(0.4)
        assert float(FractionalOrder.for_control(0.6)) == 0.6


class TestUniformGrid:
    """Test grid construction."""

    def test_nodes(self):
        grid = UniformGrid(2.0, 8)
        assert grid.step == 0.25
        assert grid.nodes[0] == 0.0
        assert grid.nodes[-1] == pytest.approx(2.0, abs=1e-15)
        assert len(grid.nodes) == 9

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError, match="n >= 2"):
            UniformGrid(1.0, 1)
        with pytest.raises(ValueError):
            UniformGrid(float("inf"), 4)
        with pytest.raises(ValueError):
            UniformGrid(0.0, 4)

    def test_refined(self):
        assert UniformGrid(1.0, 64).refined() == UniformGrid(1.0, 128)


class TestBuildWeights:
    """Test product-integration weights."""

    def test_alpha_one_rectangle_is_classical_rule(self):
        grid = UniformGrid(1.0, 10)
        weights = build_weights(1.0, grid, "rectangle")
        for k in (1, 5, 10):
            row = weights.row(k)
            np.testing.assert_allclose(row[:k], grid.step, rtol=1e-14)
            assert row[k] == 0.0

    def test_rectangle_first_cell_half_order(self):
        weights = build_weights(0.5, UniformGrid(2.0, 2), "rectangle")
        assert weights.row(1)[0] == pytest.approx(2 / math.sqrt(math.pi), rel=1e-14)

    def test_trapezoid_row_matches_hat_function_integrals(self):
        alpha = 0.5
        grid = UniformGrid(2.0, 2)  # h = 1
        weights = build_weights(alpha, grid, "trapezoid")
        t2 = grid.nodes[2]

        def hat(j):
            return lambda s: max(0.0, 1.0 - abs(s - grid.nodes[j]) / grid.step)

        expected = []
        for j in range(3):
            f = hat(j)
            smooth, _ = quad(lambda s: f(s) * (t2 - s) ** (alpha - 1), 0.0, 1.0)
            singular, _ = quad(f, 1.0, t2, weight="alg", wvar=(0.0, alpha - 1))
            expected.append((smooth + singular) / gamma(alpha))
        np.testing.assert_allclose(weights.row(2), expected, rtol=1e-10)

    @pytest.mark.parametrize("scheme", ["rectangle", "trapezoid"])
    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7, 0.9])
    def test_exact_on_constants(self, scheme, alpha):
        grid = UniformGrid(1.5, 64)
        weights = build_weights(alpha, grid, scheme)
        for k in range(1, grid.n + 1):
            expected = grid.nodes[k] ** alpha / gamma(alpha + 1)
            assert weights.row(k).sum() == pytest.approx(expected, rel=1e-12)

    def test_rectangle_weights_positive(self):
        weights = build_weights(0.7, UniformGrid(1.0, 128), "rectangle")
        assert np.all(weights.lag[1:] > 0)
        assert np.all(np.isfinite(weights.start))

    def test_unknown_scheme(self):
        with pytest.raises(ValueError, match="Unknown scheme"):
            build_weights(0.5, UniformGrid(1.0, 4), "simpson")

    def test_history_matches_row(self):
        grid = UniformGrid(1.0, 16)
        weights = build_weights(0.6, grid, "trapezoid")
        values = np.cos(grid.nodes)
        k = 11
        full = weights.row(k) @ values[: k + 1]
        assert weights.history(values, k) + weights.diagonal * values[k] == pytest.approx(full, rel=1e-14)


class TestLeftIntegral:
    """Test left Riemann-Liouville integrals."""

    def test_constant(self):
        grid = UniformGrid(1.0, 16)
        result = rl_integral_left(np.ones(17), grid, 0.5)
        assert result[0] == 0.0
        assert result[-1] == pytest.approx(2 / math.sqrt(math.pi), rel=1e-12)

    def test_alpha_one_is_cumulative_integral(self):
        grid = UniformGrid(3.0, 30)
        result = rl_integral_left(np.ones(31), grid, 1.0)
        np.testing.assert_allclose(result, grid.nodes, rtol=1e-13, atol=1e-15)

    def test_linear(self):
        grid = UniformGrid(1.0, 16)
        result = rl_integral_left(grid.nodes.copy(), grid, 0.5)
        assert result[-1] == pytest.approx(1 / gamma(2.5), rel=1e-12)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7, 0.9])
    def test_trapezoid_exact_on_affine(self, alpha):
        grid = UniformGrid(1.0, 64)
        t = grid.nodes
        result = rl_integral_left(2.0 + 3.0 * t, grid, alpha, "trapezoid")
        expected = 2.0 * t**alpha / gamma(alpha + 1) + 3.0 * t ** (alpha + 1) / gamma(alpha + 2)
        np.testing.assert_allclose(result[1:], expected[1:], rtol=1e-10)

    @pytest.mark.parametrize("scheme,min_order", [("trapezoid", 1.8), ("rectangle", 0.9)])
    def test_convergence_order(self, scheme, min_order):
        alpha = 0.5
        errors = []
        for n in (64, 128, 256, 512, 1024):
            grid = UniformGrid(1.0, n)
            t = grid.nodes
            result = rl_integral_left(t**2, grid, alpha, scheme)
            exact = 2.0 * t ** (alpha + 2) / gamma(alpha + 3)
            errors.append(np.max(np.abs(result - exact)))
        order = math.log2(errors[0] / errors[-1]) / (len(errors) - 1)
        assert order >= min_order

    def test_semigroup(self):
        grid = UniformGrid(1.0, 1024)
        inner = rl_integral_left(np.ones(1025), grid, 0.6)
        outer = rl_integral_left(inner, grid, 0.4)
        assert outer[-1] == pytest.approx(1.0, rel=1e-3)

    def test_non_finite_sample_names_node(self):
        grid = UniformGrid(1.0, 8)
        samples = np.ones(9)
        samples[3] = np.nan
        with pytest.raises(ValueError, match="node 3"):
            rl_integral_left(samples, grid, 0.5)

    def test_singular_start_skips_node_zero(self):
        grid = UniformGrid(1.0, 8)
        samples = np.ones(9)
        samples[0] = np.inf
        result = rl_integral_left(samples, grid, 0.5, "rectangle", singular_start=True)
        assert np.all(np.isfinite(result))
        assert result[-1] == pytest.approx(1 / gamma(1.5), rel=1e-12)

    def test_vector_samples(self):
        grid = UniformGrid(1.0, 8)
        samples = np.column_stack([np.ones(9), 2 * np.ones(9)])
        result = rl_integral_left(samples, grid, 0.5)
        assert result.shape == (9, 2)
        np.testing.assert_allclose(result[:, 1], 2 * result[:, 0], rtol=1e-14)


class TestRightIntegral:
    """Test right Riemann-Liouville integrals."""

    def test_constant_at_start(self):
        grid = UniformGrid(1.0, 16)
        result = rl_integral_right(np.ones(17), grid, 0.5)
        assert result[0] == pytest.approx(2 / math.sqrt(math.pi), rel=1e-12)
        assert result[-1] == 0.0

    def test_reversed_linear(self):
        grid = UniformGrid(1.0, 16)
        result = rl_integral_right(1.0 - grid.nodes, grid, 0.5)
        assert result[0] == pytest.approx(1 / gamma(2.5), rel=1e-12)

    @pytest.mark.parametrize("scheme", ["rectangle", "trapezoid"])
    def test_mirror_identity(self, scheme):
        grid = UniformGrid(2.0, 40)
        f = np.sin(3 * grid.nodes) + grid.nodes**2
        right = rl_integral_right(f, grid, 0.7, scheme)
        mirrored = rl_integral_left(f[::-1], grid, 0.7, scheme)[::-1]
        assert np.array_equal(right, mirrored)


class TestPowerIntegrals:
    """Test closed-form integrals of power functions."""

    def test_left(self):
        t = np.array([0.25, 1.0, 2.0])
        np.testing.assert_allclose(
            left_power_integral(t, 0.5, 1.0), t**0.5 / gamma(1.5), rtol=1e-14
        )

    def test_right_constant(self):
        t = np.array([0.0, 0.3, 0.9, 1.0])
        expected = (1.0 - t) ** 0.6 / gamma(1.6)
        np.testing.assert_allclose(right_power_integral(t, 1.0, 0.6, 1.0), expected, rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("t", [0.05, 0.3, 0.8])
    def test_right_singular_profile(self, t):
        alpha, horizon = 0.7, 1.0
        value, _ = quad(
            lambda s: s ** (alpha - 1), t, horizon, weight="alg", wvar=(alpha - 1, 0.0)
        )
        expected = value / gamma(alpha)
        assert right_power_integral(np.array([t]), horizon, alpha, alpha)[0] == pytest.approx(
            expected, rel=1e-8
        )

    def test_right_singular_profile_at_zero(self):
        alpha, horizon = 0.75, 2.0
        expected = horizon ** (2 * alpha - 1) / ((2 * alpha - 1) * gamma(alpha))
        assert right_power_integral(np.array([0.0]), horizon, alpha, alpha)[0] == pytest.approx(
            expected, rel=1e-14
        )


class TestMittagLeffler:
    """Test the Mittag-Leffler series."""

    def test_exponential(self):
        assert mittag_leffler(1.0, 1.0, 1.0) == pytest.approx(math.e, rel=1e-14)
        assert mittag_leffler(1.0, 1.0, -5.0) == pytest.approx(math.exp(-5.0), rel=1e-12)

    @pytest.mark.parametrize("alpha,beta", [(0.5, 0.5), (0.6, 1.3), (2.0, 1.0)])
    def test_zero_argument(self, alpha, beta):
        assert mittag_leffler(alpha, beta, 0.0) == pytest.approx(1 / gamma(beta), rel=1e-15)

    def test_half_order_closed_forms(self):
        # E_{1/2,1}(z) = exp(z^2) erfc(-z); E_{1/2,1/2}(z) = 1/sqrt(pi) + z E_{1/2,1}(z)
        assert mittag_leffler(0.5, 1.0, -3.0) == pytest.approx(erfcx(3.0), rel=1e-12)
        expected = 1 / math.sqrt(math.pi) - erfcx(1.0)
        assert mittag_leffler(0.5, 0.5, -1.0) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("z", [-10.0, -20.0, -50.0])
    @pytest.mark.parametrize("alpha", [0.6, 0.9])
    @pytest.mark.parametrize("beta_is_alpha", [True, False])
    def test_large_argument_matches_reference(self, alpha, beta_is_alpha, z):
        beta = alpha if beta_is_alpha else 1.0
        with mpmath.workdps(400):
            am, bm, zm = mpmath.mpf(alpha), mpmath.mpf(beta), mpmath.mpf(z)
            expected = float(mpmath.fsum(zm**k * mpmath.rgamma(am * k + bm) for k in range(4000)))
        assert mittag_leffler(alpha, beta, z) == pytest.approx(expected, rel=1e-10)

    def test_large_argument_values(self):
        assert mittag_leffler(0.6, 0.6, -10.0) == pytest.approx(0.00287114, rel=1e-5)
        assert mittag_leffler(0.9, 1.0, -50.0) == pytest.approx(0.00217535, rel=1e-5)
        assert mittag_leffler(0.9, 1.0, -20.0) == pytest.approx(0.00575, rel=2e-3)

    def test_large_negative_argument_asymptotics(self):
        # E_{a,b}(-x) ~ sum_j (-1)^(j+1) x^-j / Gamma(b - a j) as x grows
        x = 50.0
        leading = 1 / (x * gamma(0.1)) - 1 / (x**2 * gamma(-0.8)) + 1 / (x**3 * gamma(-1.7))
        assert mittag_leffler(0.9, 1.0, -x) == pytest.approx(leading, rel=1e-3)

    def test_budget(self):
        with pytest.raises(ValueError, match="smaller horizon"):
            mittag_leffler(0.6, 0.6, -60.0)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            mittag_leffler(0.0, 1.0, 1.0)
