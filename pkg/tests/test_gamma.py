import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from admitfair.errors import DomainError
from admitfair.gamma import (
    GammaParams,
    ScoreScale,
    cdf_dominates,
    cdf_ratio_limit_at_zero,
    cdf_ratio_sup,
    default_dominance_grid,
    from_log_score,
    gamma_cdf,
    gamma_pdf,
    gamma_quantile,
    regularized_lower_gamma,
    to_log_score,
)

shapes = st.floats(0.3, 60.0)
scales = st.floats(0.005, 5.0)
probs = st.floats(1e-9, 1 - 1e-9)


def mp_cdf(k, theta, q):
    mpmath.mp.dps = 30
    return float(mpmath.gammainc(mpmath.mpf(k), 0, mpmath.mpf(q) / mpmath.mpf(theta), regularized=True))


class TestParams:
    @pytest.mark.parametrize("shape,scale", [(0, 1), (-1, 1), (1, 0), (1, -2), (math.inf, 1), (1, math.nan)])
    def test_rejects_non_positive_or_non_finite(self, shape, scale):
        with pytest.raises(DomainError):
            GammaParams(shape, scale)

    def test_rescaled_keeps_shape(self):
        assert GammaParams(3.0, 0.2).rescaled(0.5) == GammaParams(3.0, 0.1)

    def test_score_scale_needs_increasing_bounds(self):
        with pytest.raises(DomainError):
            ScoreScale(4.0, 4.0)


class TestIncompleteGamma:
    def test_exponential_median(self):
        assert gamma_cdf(GammaParams(1.0, 1.0), math.log(2.0)) == pytest.approx(0.5, abs=1e-15)

    def test_endpoints(self):
        p = GammaParams(2.5, 0.4)
        assert gamma_cdf(p, 0.0) == 0.0
        assert gamma_cdf(p, math.inf) == 1.0

    def test_rejects_negative_q(self):
        with pytest.raises(DomainError):
            gamma_cdf(GammaParams(2.0, 1.0), -0.1)

    def test_rejects_non_positive_shape(self):
        with pytest.raises(DomainError):
            regularized_lower_gamma(0.0, 1.0)

    def test_broadcasts_and_keeps_shape(self):
        out = regularized_lower_gamma(np.array([[1.0], [2.0]]), np.array([0.5, 1.0, 3.0]))
        assert out.shape == (2, 3)
        assert out[0, 1] == pytest.approx(1 - math.exp(-1.0), abs=1e-15)

    def test_scalar_in_scalar_out(self):
        assert isinstance(regularized_lower_gamma(2.0, 1.0), float)

    @pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 6.0, 19.5, 45.0])
    @pytest.mark.parametrize("t", [1e-3, 0.3, 0.97, 1.0, 1.05, 3.0, 10.0])
    def test_matches_mpmath_on_both_branches(self, k, t):
        theta = 0.07
        q = k * theta * t
        assert gamma_cdf(GammaParams(k, theta), q) == pytest.approx(mp_cdf(k, theta, q), abs=1e-13)

    @given(shapes, scales, st.floats(0.0, 50.0), st.floats(0.0, 50.0))
    def test_monotone_in_q(self, k, theta, a, b):
        p = GammaParams(k, theta)
        lo, hi = sorted((a, b))
        assert gamma_cdf(p, lo) <= gamma_cdf(p, hi)

    @given(shapes, scales, st.floats(0.0, 100.0))
    def test_in_unit_interval(self, k, theta, q):
        v = gamma_cdf(GammaParams(k, theta), q)
        assert 0.0 <= v <= 1.0


class TestDensity:
    def test_origin_values(self):
        assert gamma_pdf(GammaParams(0.5, 1.0), 0.0) == math.inf
        assert gamma_pdf(GammaParams(1.0, 0.25), 0.0) == 4.0
        assert gamma_pdf(GammaParams(3.0, 1.0), 0.0) == 0.0

    def test_closed_form(self):
        q = 0.4
        expected = q * math.exp(-q / 0.3) / 0.3**2
        assert gamma_pdf(GammaParams(2.0, 0.3), q) == pytest.approx(expected, rel=1e-14)

    def test_derivative_of_cdf(self):
        p = GammaParams(4.2, 0.11)
        q, h = 0.5, 1e-6
        slope = (gamma_cdf(p, q + h) - gamma_cdf(p, q - h)) / (2 * h)
        assert slope == pytest.approx(gamma_pdf(p, q), rel=1e-7)


class TestQuantile:
    @pytest.mark.parametrize("prob", [0.0, 1.0, -0.2, 1.5])
    def test_rejects_closed_endpoints(self, prob):
        with pytest.raises(DomainError):
            gamma_quantile(GammaParams(2.0, 1.0), prob)

    def test_exponential_median(self):
        assert gamma_quantile(GammaParams(1.0, 1.0), 0.5) == pytest.approx(math.log(2.0), rel=1e-14)

    @given(shapes, scales, probs)
    def test_round_trip(self, k, theta, prob):
        p = GammaParams(k, theta)
        assert gamma_cdf(p, gamma_quantile(p, prob)) == pytest.approx(prob, abs=1e-10)

    @given(shapes, st.floats(0.01, 2.0), st.floats(0.1, 5.0), probs)
    def test_scale_equivariance(self, k, theta, factor, prob):
        base = gamma_quantile(GammaParams(k, theta), prob)
        scaled = gamma_quantile(GammaParams(k, theta * factor), prob)
        assert scaled == pytest.approx(base * factor, rel=1e-9)


class TestLogScore:
    SCALE = ScoreScale(0.0, 4.0)

    def test_top_score_is_zero(self):
        q = to_log_score(4.0, self.SCALE)
        assert q == 0.0 and math.copysign(1.0, q) == 1.0

    def test_half_scale_is_log_two(self):
        assert to_log_score(2.0, self.SCALE) == pytest.approx(math.log(2.0), rel=1e-15)

    def test_mean_anchor(self):
        assert to_log_score(3.34, self.SCALE) == pytest.approx(0.1803, abs=5e-5)
        assert from_log_score(6 * 0.03, self.SCALE) == pytest.approx(3.34108, abs=1e-5)

    @pytest.mark.parametrize("s", [0.0, -1.0, 4.3])
    def test_rejects_outside_range(self, s):
        with pytest.raises(DomainError):
            to_log_score(s, self.SCALE)

    @given(st.floats(-5.0, 5.0), st.floats(0.1, 10.0), st.floats(1e-6, 1.0))
    def test_round_trip(self, s_min, width, frac):
        scale = ScoreScale(s_min, s_min + width)
        s = s_min + frac * width
        assert from_log_score(to_log_score(s, scale), scale) == pytest.approx(s, rel=1e-12, abs=1e-12)

    def test_order_reverses(self):
        assert to_log_score(3.9, self.SCALE) < to_log_score(3.0, self.SCALE)


class TestDominanceAndRatio:
    def test_smaller_scale_dominates(self):
        rich, poor = GammaParams(2.0, 0.15), GammaParams(2.0, 0.3)
        grid = default_dominance_grid(rich, poor)
        assert cdf_dominates(rich, poor, grid)
        assert not cdf_dominates(poor, rich, grid)

    @pytest.mark.parametrize("grid", [[], [1.0, 0.5], [0.0, 1.0]])
    def test_bad_grid(self, grid):
        with pytest.raises(ValueError):
            cdf_dominates(GammaParams(1, 1), GammaParams(1, 2), grid)

    def test_equal_shape_sup_is_zero_limit(self):
        # the ratio decreases from (theta_p/theta_r)^k at 0 towards 1
        rich, poor = GammaParams(2.0, 0.15), GammaParams(2.0, 0.3)
        assert cdf_ratio_limit_at_zero(rich, poor) == pytest.approx(4.0)
        assert cdf_ratio_sup(rich, poor) == pytest.approx(4.0, rel=1e-12)

    def test_smaller_rich_shape_gives_infinite_sup(self):
        assert cdf_ratio_sup(GammaParams(1.5, 0.1), GammaParams(3.0, 0.2)) == math.inf

    @given(st.floats(1.0, 10.0), st.floats(0.01, 1.0), st.floats(1.01, 5.0))
    def test_sup_bounds_every_sampled_ratio(self, k, theta_rich, factor):
        rich, poor = GammaParams(k, theta_rich), GammaParams(k, theta_rich * factor)
        sup = cdf_ratio_sup(rich, poor)
        q = np.geomspace(1e-3 * theta_rich, 30 * k * theta_rich * factor, 97)
        ratios = gamma_cdf(rich, q) / gamma_cdf(poor, q)
        assert np.all(ratios <= sup * (1 + 1e-12))
