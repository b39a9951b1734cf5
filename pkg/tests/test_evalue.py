import math

import numpy as np
import pytest

from ppe import evalue
from ppe.evalue import (
    EComponentSpec,
    Observation,
    PPIStream,
    draw_xi,
    min_collection_prob,
    ppi_component,
    step,
)
from ppe.rng import substream, uniforms


def identity_spec(a=0.5, b=1.5):
    return EComponentSpec(eval=lambda y: y, a=a, b=b)


class TestPpiComponent:
    def test_uncollected_returns_imputed(self):
        assert ppi_component(0.7, None, 0, 0.5, (0.6, 1.2)) == 0.7

    def test_full_collection_recovers_labeled(self):
        assert ppi_component(1.2, 0.8, 1, 1.0, (0.5, 1.5)) == pytest.approx(0.8, abs=1e-15)

    def test_collected_branch_hand_value(self):
        # independent scalar evaluation: (0.8 - (1 - 0.5)*1.2) / 0.5 = 0.4
        e_y, e_mu, pi = 0.8, 1.2, 0.5
        oracle = (e_y - (1 - pi) * e_mu) / pi
        assert oracle == pytest.approx(0.4, abs=1e-15)
        assert ppi_component(e_mu, e_y, 1, pi, (0.8, 1.6)) == pytest.approx(oracle, abs=1e-15)

    def test_rejects_out_of_bound_components(self):
        with pytest.raises(ValueError):
            ppi_component(2.0, None, 0, 0.9, (0.5, 1.5))
        with pytest.raises(ValueError):
            ppi_component(1.0, 3.0, 1, 0.9, (0.5, 1.5))

    def test_rejects_pi_below_bound_floor(self):
        # 1 - a/b = 0.75 here, so pi = 0.5 signals a budget/bound mismatch
        with pytest.raises(ValueError):
            ppi_component(1.0, 1.0, 1, 0.5, (0.5, 2.0))

    def test_rejects_missing_label(self):
        with pytest.raises(ValueError):
            ppi_component(1.0, None, 1, 0.9, (0.5, 1.5))

    def test_vectorized_matches_scalar(self):
        rng = substream(77, "vec")
        u, rng = uniforms(rng, 4 * 256)
        u = u.reshape(4, 256)
        a = 0.2 + 0.5 * u[0]
        b = a * (1.0 + 3.0 * u[1])
        floor = 1.0 - a / b
        pi = floor + (1.0 - floor) * np.maximum(u[2], 1e-3)
        e_mu = a + (b - a) * u[3]
        e_y = b - (b - a) * u[0]
        xi = (u[1] > 0.5).astype(int)
        vec = ppi_component(e_mu, e_y, xi, pi, (a, b))
        for k in range(256):
            scalar = ppi_component(
                e_mu[k], e_y[k] if xi[k] else None, int(xi[k]), pi[k], (a[k], b[k])
            )
            assert scalar == pytest.approx(vec[k], rel=1e-12)

    def test_nonnegative_over_random_admissible_inputs(self):
        # spec invariant: >= 1e5 random admissible configurations, no violations
        rng = substream(101, "nonneg")
        n = 100_000
        u, rng = uniforms(rng, 5 * n)
        u = u.reshape(5, n)
        a = 0.05 + 1.5 * u[0]
        b = a * (1.0 + 10.0 * u[1])
        floor = 1.0 - a / b
        pi = floor + (1.0 - floor) * u[2]
        pi = np.maximum(pi, 1e-12)
        e_mu = a + (b - a) * u[3]
        e_y = a + (b - a) * u[4]
        xi = (u[0] * 7919 % 1.0 > 0.5).astype(int)
        out = ppi_component(e_mu, e_y, xi, pi, (a, b))
        assert np.all(out >= 0.0)


class TestConditionalMeanIdentity:
    def test_enumeration_matches_labeled_expectation(self):
        # brute-force enumeration over (y, xi) against the labeled mean
        rng = substream(55, "identity")
        for trial in range(200):
            u, rng = uniforms(rng, 12)
            a = 0.1 + u[0]
            b = a * (1.0 + 4.0 * u[1])
            k = 2 + int(3 * u[2])
            weights = u[3:3 + k]
            probs = weights / weights.sum()
            e_vals = a + (b - a) * u[6:6 + k]
            e_mu = a + (b - a) * u[10]
            floor = 1.0 - a / b
            pi = floor + (1.0 - floor) * max(u[11], 1e-6)
            pi = max(pi, 1e-9)
            expected = float(np.dot(probs, e_vals))
            got = 0.0
            for prob, e_y in zip(probs, e_vals):
                collected = ppi_component(e_mu, e_y, 1, pi, (a, b))
                skipped = ppi_component(e_mu, None, 0, pi, (a, b))
                # per-outcome algebraic identity
                assert pi * collected + (1 - pi) * skipped == pytest.approx(e_y, abs=1e-12)
                got += prob * (pi * collected + (1 - pi) * skipped)
            assert got == pytest.approx(expected, abs=1e-12)


class TestMinCollectionProb:
    def test_tight_bounds_need_no_collection(self):
        assert min_collection_prob(1.0, 1.0) == 0.0

    def test_hand_values(self):
        assert min_collection_prob(0.5, 2.0) == pytest.approx(0.75, abs=1e-15)
        assert min_collection_prob(0.99, 1.01) == pytest.approx(1 - 0.99 / 1.01, abs=1e-15)

    def test_rejects_bad_bounds(self):
        with pytest.raises(ValueError):
            min_collection_prob(2.0, 1.0)
        with pytest.raises(ValueError):
            min_collection_prob(0.0, 1.0)


class TestStep:
    def test_multiplicative_identity(self):
        s = PPIStream.fresh(1)
        spec = identity_spec()
        obs = Observation(x=None, y=None, xi=0, pi=0.9)
        s2 = step(s, obs, spec, 1.0)
        assert s2.log_e == pytest.approx(0.0, abs=1e-15)
        assert s2.n == 1 and s2.labels_used == 0

    def test_inverse_pair(self):
        s = PPIStream(log_e=math.log(2.0), n=5)
        spec = identity_spec(a=0.4, b=1.6)
        s2 = step(s, Observation(x=None, y=None, xi=0, pi=0.9), spec, 0.5)
        assert s2.e_value == pytest.approx(1.0, rel=1e-12)

    def test_three_step_product_matches_linear_oracle(self):
        values = [1.5, 0.4, 2.0]
        oracle = 1.0
        for v in values:
            oracle *= v  # independent linear-domain accumulation
        assert oracle == pytest.approx(1.2, abs=1e-12)
        s = PPIStream.fresh(2)
        spec = identity_spec(a=0.2, b=2.5)
        for v in values:
            s = step(s, Observation(x=None, y=None, xi=0, pi=0.95), spec, v)
        assert s.e_value == pytest.approx(oracle, rel=1e-12)
        assert s.n == 3

    def test_labels_used_counts_collections(self):
        s = PPIStream.fresh(3)
        spec = identity_spec(a=0.9, b=1.1)
        s = step(s, Observation(x=None, y=1.0, xi=1, pi=0.5), spec, 1.0)
        s = step(s, Observation(x=None, y=None, xi=0, pi=0.5), spec, 1.0)
        assert s.labels_used == 1 and s.n == 2

    def test_zero_component_is_hard_fault(self):
        spec = identity_spec(a=0.5, b=1.0)
        # pi exactly at 1 - a/b with extreme components drives the branch to 0
        obs = Observation(x=None, y=0.5, xi=1, pi=0.5)
        with pytest.raises(FloatingPointError):
            step(PPIStream.fresh(4), obs, spec, 1.0)


class TestPerfectModelCollapse:
    def test_path_identical_to_fully_labeled(self):
        # if e(mu(x)) always equals e(y), every xi path gives the labeled path
        rng = substream(8, "collapse")
        spec = identity_spec(a=0.9, b=1.1)  # floor 1 - a/b ~ 0.18, pi = 0.4 admissible
        u, rng = uniforms(rng, 200)
        ys = 0.92 + 0.16 * u
        for xi_seed in range(3):
            xi_u, rng = uniforms(rng, 200)
            labeled = PPIStream.fresh(0)
            ppi = PPIStream.fresh(0)
            for y, coin in zip(ys, xi_u):
                xi = int(coin < 0.4)
                labeled = step(labeled, Observation(x=None, y=y, xi=1, pi=1.0), spec, y)
                ppi = step(
                    ppi, Observation(x=None, y=y if xi else None, xi=xi, pi=0.4), spec, y
                )
            assert ppi.log_e == pytest.approx(labeled.log_e, abs=1e-12)


class TestDrawXi:
    def test_degenerate_probabilities(self):
        rng = substream(1, "xi")
        for _ in range(100):
            one, rng = draw_xi(1.0, rng)
            zero, rng = draw_xi(0.0, rng)
            assert one == 1 and zero == 0

    def test_empirical_rate_within_binomial_error(self):
        rng = substream(2, "xi-rate")
        n = 100_000
        hits = 0
        u, rng = uniforms(rng, n)
        hits = int(np.sum(u < 0.3))
        se = math.sqrt(0.3 * 0.7 / n)
        assert abs(hits / n - 0.3) < 3 * se

    def test_deterministic_given_state(self):
        rng = substream(3, "xi-det")
        a, _ = draw_xi(0.5, rng)
        b, _ = draw_xi(0.5, rng)
        assert a == b


class TestGrowthDecomposition:
    def test_log_growth_matches_two_term_decomposition(self):
        # fixed pi and mu: realized mean log component vs its conditional
        # expectation over the coin, within 3 Monte Carlo standard errors
        n = 10_000
        pi = 0.3
        theta, lam = 0.4, 0.3  # bounds (0.88, 1.18): floor ~ 0.254 < pi
        z_mu = 0.52
        rng = substream(99, "growth")
        u, rng = uniforms(rng, 2 * n)
        ys = (u[:n] < 0.55).astype(float)
        xis = (u[n:] < pi).astype(int)
        e_mu = 1.0 + lam * (z_mu - theta)
        e_ys = 1.0 + lam * (ys - theta)
        a = 1.0 - lam * theta
        b = 1.0 + lam * (1.0 - theta)
        lhs = np.log(ppi_component(np.full(n, e_mu), e_ys, xis, pi, (a, b)))
        rhs = (1 - pi) * math.log(e_mu) + pi * np.log(e_mu + (e_ys - e_mu) / pi)
        diff = lhs - rhs
        se = diff.std(ddof=1) / math.sqrt(n)
        assert abs(diff.mean()) < 3 * se


class TestSerialization:
    def test_round_trip(self):
        s = PPIStream.fresh(42, "ser")
        spec = identity_spec()
        s = step(s, Observation(x=None, y=1.2, xi=1, pi=0.8), spec, 1.1)
        assert evalue.loads(evalue.dumps(s)) == s

    def test_record_fields_versioned(self):
        record = evalue.to_record(PPIStream.fresh(0))
        assert record["version"] == 1
        assert {"log_e", "n", "labels_used", "rng_key", "rng_counter"} <= set(record)

    def test_rejects_unknown_version(self):
        record = evalue.to_record(PPIStream.fresh(0))
        record["version"] = 99
        with pytest.raises(ValueError):
            evalue.from_record(record)


def test_observation_validates_consistency():
    with pytest.raises(ValueError):
        Observation(x=None, y=None, xi=1, pi=0.5)
    with pytest.raises(ValueError):
        Observation(x=None, y=1.0, xi=2, pi=0.5)


def test_component_spec_clamp_counter():
    spec = EComponentSpec(eval=lambda y: y, a=0.5, b=1.5)
    assert spec.evaluate(1.5 + 1e-13) == 1.5  # one-ulp drift clamped silently
    assert spec.clamp_warnings == 0
    assert spec.evaluate(2.0) == 1.5
    assert spec.clamp_warnings == 1
