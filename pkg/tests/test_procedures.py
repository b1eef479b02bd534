import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from admitfair.errors import CapacityError, DomainError, InfeasibleQuotaError
from admitfair.gamma import GammaParams, gamma_pdf
from admitfair.procedures import (
    default_threshold,
    pdf_intersection,
    plus_factor_counts_on_perceived_scale,
    quota_eta_prime,
    solve,
    solve_default,
    solve_plus_factor,
    solve_quota,
    solve_top_percentage,
)
from helpers import random_instance, random_quota_eta


class TestAgainstFrozenOracle:
    def test_default(self, fixture_pop, procedure_oracle):
        assert default_threshold(fixture_pop, 50) == pytest.approx(procedure_oracle["q_o"], abs=1e-10)

    def test_top_percentage(self, fixture_pop, procedure_oracle):
        out = solve_top_percentage(fixture_pop, 50)
        for r, q in procedure_oracle["top_percentage"].items():
            assert out.thresholds[("URM", r)] == pytest.approx(q, abs=1e-10)

    @pytest.mark.parametrize("eta", ["0.8", "0.9"])
    def test_plus_factor(self, fixture_pop, procedure_oracle, eta):
        out = solve_plus_factor(fixture_pop, 50, float(eta))
        assert out.derived["q_dagger"] == pytest.approx(procedure_oracle[f"plus_factor_{eta}"], abs=1e-10)

    def test_quota(self, fixture_pop, procedure_oracle):
        out = solve_quota(fixture_pop, 50, 1.5)
        for group, row in procedure_oracle["quota_1.5"].items():
            for r, q in row.items():
                assert out.thresholds[(group, r)] == pytest.approx(q, abs=1e-10)


class TestQuota:
    def test_eta_prime_formula(self, fixture_pop):
        assert quota_eta_prime(fixture_pop, 2.0) == pytest.approx(1 / 3)

    def test_probability_one_and_zero_endpoints(self, fixture_pop):
        # g * eta / n = 1 at g = 50, eta = 2
        out = solve_quota(fixture_pop, 50, 2.0)
        assert out.thresholds[("URM", "poor")] == math.inf
        assert out.admit_prob[("URM", "rich")] == 1.0
        assert out.total_admits == pytest.approx(50, abs=1e-9)

    def test_eta_prime_zero(self, fixture_pop):
        out = solve_quota(fixture_pop, 20, 2.5)
        assert out.thresholds[("nonURM", "poor")] == 0.0
        assert out.admit_prob[("nonURM", "rich")] == 0.0
        assert out.group_admits("URM") == pytest.approx(20, abs=1e-9)

    def test_infeasible(self, fixture_pop):
        with pytest.raises(InfeasibleQuotaError):
            solve_quota(fixture_pop, 60, 2.0)

    @pytest.mark.parametrize("eta", [0.9, 2.6])
    def test_eta_range(self, fixture_pop, eta):
        with pytest.raises(ValueError):
            solve_quota(fixture_pop, 50, eta)

    def test_urm_seats(self, fixture_pop):
        out = solve_quota(fixture_pop, 50, 1.5)
        assert out.group_admits("URM") == pytest.approx(out.derived["urm_quota"], rel=1e-10)


class TestPlusFactor:
    def test_identity_factor_is_default(self, fixture_pop):
        plus = solve_plus_factor(fixture_pop, 50, 1.0)
        assert plus.derived["q_dagger"] == pytest.approx(default_threshold(fixture_pop, 50), abs=1e-10)

    def test_threshold_ordering(self, fixture_pop):
        d = solve_plus_factor(fixture_pop, 50, 0.8).derived
        assert d["q_dagger"] < d["q_o"] < d["q_dagger_over_eta"]

    def test_effective_threshold_matches_perceived_scale(self, fixture_pop):
        out = solve_plus_factor(fixture_pop, 50, 0.7)
        perceived = plus_factor_counts_on_perceived_scale(fixture_pop, out.derived["q_dagger"], 0.7)
        for cell, count in perceived.items():
            assert out.admit_count[cell] == pytest.approx(count, abs=1e-12)

    @pytest.mark.parametrize("eta", [0.0, 1.2])
    def test_range(self, fixture_pop, eta):
        with pytest.raises(ValueError):
            solve_plus_factor(fixture_pop, 50, eta)


class TestTopPercentage:
    def test_equal_rates(self, fixture_pop):
        out = solve_top_percentage(fixture_pop, 50)
        assert set(np.round(list(out.admit_prob.values()), 12)) == {0.5}

    def test_equal_shape_ratio(self, fixture_pop):
        d = solve_top_percentage(fixture_pop, 50).derived
        assert d["q_region:poor"] / d["q_region:rich"] == pytest.approx(2.0, rel=1e-10)


class TestDispatch:
    def test_eta_rules(self, fixture_pop):
        with pytest.raises(ValueError):
            solve(fixture_pop, 50, "quota")
        with pytest.raises(ValueError):
            solve(fixture_pop, 50, "default", eta=1.0)
        with pytest.raises(ValueError):
            solve(fixture_pop, 50, "lottery")

    @pytest.mark.parametrize("g", [0, 100, -5])
    def test_capacity(self, fixture_pop, g):
        with pytest.raises(CapacityError):
            solve_default(fixture_pop, g)


class TestPdfIntersection:
    def test_densities_cross(self):
        k, tp, tr = 2.0, 0.3, 0.15
        q = pdf_intersection(k, tp, tr)
        assert gamma_pdf(GammaParams(k, tp), q) == pytest.approx(gamma_pdf(GammaParams(k, tr), q), rel=1e-12)

    def test_equal_scales(self):
        with pytest.raises(DomainError):
            pdf_intersection(2.0, 0.3, 0.3)


@given(st.integers(0, 2**32 - 1))
def test_conservation_property(seed):
    rng = np.random.default_rng(seed)
    pop, g = random_instance(rng)
    eta = random_quota_eta(rng, pop, g)
    for out in (
        solve_default(pop, g),
        solve_quota(pop, g, eta),
        solve_plus_factor(pop, g, float(rng.uniform(0.05, 1.0))),
        solve_top_percentage(pop, g),
    ):
        assert abs(out.total_admits - g) <= 1e-8 * pop.total
        assert all(0.0 <= p <= 1.0 for p in out.admit_prob.values())
