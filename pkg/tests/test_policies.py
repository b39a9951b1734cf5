import math

import numpy as np
import pytest

from ppe.evalue import EComponentSpec
from ppe.policies import (
    PolicyConfig,
    _approx_optimal_branch,
    approx_optimal_pi,
    constant_policy,
    ratio_estimate,
    taylor_coeffs,
)
from ppe.predictors import Constant
from ppe.rng import substream, uniforms


class TestConstantPolicy:
    def test_ignores_features(self):
        assert constant_policy(0.01, x=[1.0, 2.0]) == 0.01
        assert constant_policy(0.01, x=None) == 0.01

    def test_degenerate_budgets(self):
        assert constant_policy(1.0) == 1.0
        assert constant_policy(0.005) == 0.005

    def test_rejects_bad_budget(self):
        with pytest.raises(ValueError):
            constant_policy(0.0)

    def test_budget_realization(self):
        # realized collection rate matches the budget within binomial error
        n = 100_000
        pi = 0.03
        u, _ = uniforms(substream(41, "budget"), n)
        rate = float(np.mean(u < constant_policy(pi)))
        assert abs(rate - pi) < 3 * math.sqrt(pi * (1 - pi) / n)


class TestTaylorCoeffs:
    def test_degenerate_at_one(self):
        alpha, beta = taylor_coeffs(1.0)
        assert alpha == pytest.approx(0.0, abs=1e-15)
        assert beta == pytest.approx(0.0, abs=1e-15)

    def test_hand_values(self):
        alpha, beta = taylor_coeffs(2.0)
        assert alpha == pytest.approx(math.log(2.0) - 1.0, abs=1e-12)
        assert alpha == pytest.approx(-0.30685, abs=1e-5)
        assert beta == pytest.approx(0.25, abs=1e-15)
        alpha_e, beta_e = taylor_coeffs(math.e)
        assert alpha_e == pytest.approx(2.0 / math.e - 1.0, abs=1e-12)
        assert alpha_e == pytest.approx(-0.26424, abs=1e-5)
        assert beta_e == pytest.approx((math.e - 1.0) / math.e**2, abs=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            taylor_coeffs(0.0)


class TestApproxOptimalPi:
    def test_floor_branch_trace(self):
        # r = 1, a = 2: u = 0 < pi_inf; alpha + beta ~ -0.0569 <= 0 -> floor
        coeffs = taylor_coeffs(2.0)
        value, branch = _approx_optimal_branch(1.0, coeffs, 0.1)
        assert branch == "floor" and value == 0.1
        assert coeffs[0] + coeffs[1] == pytest.approx(-0.0569, abs=1e-4)

    def test_full_budget_collapses_interval(self):
        assert approx_optimal_pi(1.0, taylor_coeffs(2.0), 1.0) == 1.0
        assert approx_optimal_pi(17.0, taylor_coeffs(1.5), 1.0) == 1.0

    def test_ceiling_branch_trace(self):
        # a = 2, pi_inf = 0.1, r = 5: alpha + 0.25*(50 - 9) > 0 -> ceiling
        coeffs = taylor_coeffs(2.0)
        value, branch = _approx_optimal_branch(5.0, coeffs, 0.1)
        assert branch == "ceiling" and value == 1.0
        assert coeffs[0] + coeffs[1] * (5.0 / 0.1 - 9.0) > 0

    def test_degenerate_expansion_falls_back(self):
        with pytest.warns(UserWarning):
            value, branch = _approx_optimal_branch(2.0, taylor_coeffs(1.0), 0.2)
        assert branch == "degenerate" and value == 0.2

    def test_range_property(self):
        # output always lands in [pi_inf, 1]
        rng = substream(42, "range")
        u, _ = uniforms(rng, 3 * 5000)
        u = u.reshape(3, -1)
        for r, a, pi in zip(0.01 + 10 * u[0], 0.2 + 3 * u[1], np.maximum(u[2], 1e-3)):
            out = approx_optimal_pi(r, taylor_coeffs(a), pi)
            assert pi - 1e-12 <= out <= 1.0 + 1e-12

    def test_branch_exhaustiveness(self):
        # exactly one branch fires for every input
        rng = substream(43, "branches")
        u, _ = uniforms(rng, 3 * 5000)
        u = u.reshape(3, -1)
        counts = {"interior": 0, "floor": 0, "ceiling": 0, "degenerate": 0}
        for r, a, pi in zip(0.01 + 10 * u[0], 0.2 + 3 * u[1], np.maximum(u[2], 1e-3)):
            _, branch = _approx_optimal_branch(r, taylor_coeffs(a), pi)
            counts[branch] += 1
        assert sum(counts.values()) == 5000
        assert counts["floor"] > 0 and counts["ceiling"] > 0

    def test_rejects_bad_ratio(self):
        with pytest.raises(ValueError):
            approx_optimal_pi(0.0, taylor_coeffs(1.5), 0.1)


class TestRatioEstimate:
    def test_point_mass_predictor_gives_one(self):
        spec = EComponentSpec(eval=lambda y: 1.0 + 0.4 * (y - 0.5), a=0.8, b=1.2)
        assert ratio_estimate(Constant(0.5), spec, x=None) == pytest.approx(1.0, rel=1e-9)

    def test_binary_enumeration_hand_value(self):
        # P(1) = 0.5 with e(1) = 1.5, e(0) = 0.5, mu = 1 -> (0.75 + 0.25)/1.5
        class HalfHalf:
            def predict(self, x):
                return 1.0

            def predict_dist(self, x):
                return [(1.0, 0.5), (0.0, 0.5)]

        spec = EComponentSpec(eval=lambda y: 1.5 if y >= 0.5 else 0.5, a=0.5, b=1.5)
        assert ratio_estimate(HalfHalf(), spec, x=None) == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_constant_component_gives_one(self):
        spec = EComponentSpec(eval=lambda y: 1.0, a=1.0, b=1.0)
        class AnyDist:
            def predict(self, x):
                return 0.3

            def predict_dist(self, x):
                return [(0.0, 0.25), (0.5, 0.5), (1.0, 0.25)]

        assert ratio_estimate(AnyDist(), spec, x=None) == pytest.approx(1.0, rel=1e-12)

    def test_sampleable_predictor_monte_carlo_path(self):
        # no finite distribution: falls back to >= 256 draws from sample()
        class Sampler:
            def predict(self, x):
                return 0.5

            def predict_dist(self, x):
                return None

            def sample(self, x, u):
                return (u < 0.5).astype(float)

        spec = EComponentSpec(eval=lambda y: 1.0 + 0.4 * (y - 0.5), a=0.8, b=1.2)
        got = ratio_estimate(Sampler(), spec, x=None, rng=substream(9, "mc"), n_samples=4096)
        # exact enumeration oracle: (0.5*e(1) + 0.5*e(0)) / e(0.5) = 1
        assert got == pytest.approx(1.0, abs=0.02)
        with pytest.raises(ValueError):
            ratio_estimate(Sampler(), spec, x=None)  # sampling needs an rng


def test_policy_config_validation():
    with pytest.raises(ValueError):
        PolicyConfig(pi_inf=0.0)
    with pytest.raises(ValueError):
        PolicyConfig(pi_inf=0.1, mode="bogus")
    assert PolicyConfig(pi_inf=0.1).taylor_a == 1.5


def test_policy_pi_resolves_both_modes():
    from ppe.policies import policy_pi
    from ppe.predictors import EwmaMean

    spec = EComponentSpec(eval=lambda y: 1.0 + 0.1 * (y - 0.5), a=0.9, b=1.1)
    predictor = EwmaMean(init=0.5)
    constant = PolicyConfig(pi_inf=0.02, mode="constant")
    assert policy_pi(constant, predictor, spec, x=None) == 0.02
    active = PolicyConfig(pi_inf=0.02, mode="approx_optimal")
    out = policy_pi(active, predictor, spec, x=None)
    assert 0.02 <= out <= 1.0
