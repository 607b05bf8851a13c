import math

import numpy as np
import pytest

from doseopt import (CountTable, UtilitySpec, estimate_model, joint_probs,
                     marginal_rate_of_substitution, mean_utility_decomposed,
                     phi_bounds, utility_from_margins, utility_moments)


def pearson_phi_of_table(pi):
    """Correlation of the 2x2 table implied by pi, straight from the definition."""
    p = pi[0] + pi[1]
    q = pi[0] + pi[2]
    return (pi[0] - p * q) / math.sqrt(p * (1 - p) * q * (1 - q))


def phi_bounds_grid_oracle(p, q, steps=2_000_001):
    """Exhaustive scan over feasible pi1 values, independent of the closed form."""
    lo_pi1 = max(0.0, p + q - 1.0)
    hi_pi1 = min(p, q)
    grid = np.linspace(lo_pi1, hi_pi1, 5)  # phi is linear in pi1, ends suffice
    phis = [(pi1 - p * q) / math.sqrt(p * (1 - p) * q * (1 - q)) for pi1 in grid]
    return min(phis), max(phis)


class TestUtilityFromMargins:
    def test_equal_margins(self):
        u = utility_from_margins(0.15, 0.15)
        assert u.scores == (1.0, 0.5, 0.5, 0.0)
        assert not u.swapped

    def test_response_margin_smaller(self):
        u = utility_from_margins(0.10, 0.15)
        assert u.scores == pytest.approx((1.0, 0.6, 0.4, 0.0), abs=1e-15)
        assert u.r == pytest.approx(2 / 3)

    def test_swap_restores_ordering(self):
        u = utility_from_margins(0.30, 0.15)
        assert u.swapped
        assert u.r == pytest.approx(2.0)
        assert u.scores == pytest.approx((1.0, 2 / 3, 1 / 3, 0.0))

    @pytest.mark.parametrize("delta,d", [(0.0, 0.1), (-0.1, 0.1), (0.1, 0.0), (0.1, 1.5)])
    def test_bad_margins(self, delta, d):
        with pytest.raises(ValueError):
            utility_from_margins(delta, d)

    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            UtilitySpec(1.0, 0.3, 0.7, 0.0)


class TestPhiBounds:
    def test_symmetric_marginals(self):
        lo, hi = phi_bounds(0.5, 0.5)
        assert lo == pytest.approx(-1.0)
        assert hi == pytest.approx(1.0)

    @pytest.mark.parametrize("p,q", [(0.3, 0.5), (0.9, 0.9), (0.2, 0.7), (0.85, 0.15)])
    def test_against_grid_oracle(self, p, q):
        lo, hi = phi_bounds(p, q)
        olo, ohi = phi_bounds_grid_oracle(p, q)
        assert lo == pytest.approx(olo, abs=1e-12)
        assert hi == pytest.approx(ohi, abs=1e-12)

    def test_known_values(self):
        lo, hi = phi_bounds(0.3, 0.5)
        assert lo == pytest.approx(-0.65465, abs=5e-6)
        assert hi == pytest.approx(0.65465, abs=5e-6)
        lo, hi = phi_bounds(0.9, 0.9)
        assert lo == pytest.approx(-1 / 9, abs=1e-12)
        assert hi == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("p,q", [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0)])
    def test_degenerate_marginals(self, p, q):
        with pytest.raises(ValueError):
            phi_bounds(p, q)


class TestJointProbs:
    def test_independence(self):
        m = joint_probs(0.3, 0.5, 0.0)
        assert m.pi == pytest.approx((0.15, 0.15, 0.35, 0.35))

    def test_positive_correlation(self):
        m = joint_probs(0.3, 0.5, 0.2)
        assert m.pi == pytest.approx((0.19583, 0.10417, 0.30417, 0.39583), abs=5e-6)
        # feeding the table back through the correlation definition recovers phi
        assert pearson_phi_of_table(m.pi) == pytest.approx(0.2, abs=1e-12)

    def test_perfect_correlation(self):
        m = joint_probs(0.5, 0.5, 1.0)
        assert m.pi == pytest.approx((0.5, 0.0, 0.0, 0.5), abs=1e-15)

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError, match="bounds"):
            joint_probs(0.3, 0.5, 0.9)

    def test_truncation_opt_in(self):
        m = joint_probs(0.3, 0.5, 0.9, truncate=True)
        _, hi = phi_bounds(0.3, 0.5)
        assert m.phi == pytest.approx(hi)
        assert min(m.pi) >= 0.0

    def test_grid_roundtrip(self):
        for p in np.linspace(0.05, 0.95, 10):
            for q in np.linspace(0.05, 0.95, 10):
                lo, hi = phi_bounds(p, q)
                for phi in np.linspace(lo, hi, 5):
                    m = joint_probs(float(p), float(q), float(phi))
                    assert abs(sum(m.pi) - 1) < 1e-12
                    assert m.pi[0] + m.pi[1] == pytest.approx(p, abs=1e-12)
                    assert m.pi[0] + m.pi[2] == pytest.approx(q, abs=1e-12)
                    assert pearson_phi_of_table(m.pi) == pytest.approx(phi, abs=1e-10)


class TestEstimateModel:
    def test_balanced(self):
        m = estimate_model(CountTable(25, 25, 25, 25))
        assert (m.p, m.q, m.phi) == (0.5, 0.5, 0.0)

    def test_diagonal(self):
        m = estimate_model(CountTable(30, 0, 0, 70))
        assert (m.p, m.q) == (0.3, 0.3)
        assert m.phi == pytest.approx(1.0)
        assert not m.degenerate

    def test_pearson_matches_direct_computation(self):
        m = estimate_model(CountTable(20, 10, 30, 40))
        # correlation of the raw 0/1 data
        x = np.array([1] * 30 + [0] * 70)
        y = np.array([1] * 20 + [0] * 10 + [1] * 30 + [0] * 40)
        direct = np.corrcoef(x, y)[0, 1]
        assert m.p == pytest.approx(0.3)
        assert m.q == pytest.approx(0.5)
        assert m.phi == pytest.approx(direct, abs=1e-12)
        assert m.phi == pytest.approx(0.21822, abs=5e-6)

    def test_degenerate_marginal_flagged(self):
        m = estimate_model(CountTable(0, 0, 30, 70))
        assert m.degenerate
        assert m.phi == 0.0
        assert m.p == 0.0

    def test_roundtrip_exact_counts(self):
        # rational pi: counts of n * pi are integers, so recovery is exact
        for counts in [CountTable(20, 10, 30, 40), CountTable(15, 15, 35, 35),
                       CountTable(12, 28, 18, 42)]:
            n = counts.n
            pi1 = counts.n11 / n
            p = (counts.n11 + counts.n10) / n
            q = (counts.n11 + counts.n01) / n
            phi = (pi1 - p * q) / math.sqrt(p * (1 - p) * q * (1 - q))
            m = estimate_model(counts)
            assert m.p == pytest.approx(p, abs=1e-15)
            assert m.q == pytest.approx(q, abs=1e-15)
            assert m.phi == pytest.approx(phi, abs=1e-13)
            assert m.pi == pytest.approx((pi1, p - pi1, q - pi1, 1 - p - q + pi1),
                                         abs=1e-13)


class TestUtilityMoments:
    def brute_force(self, u, m):
        """Expectations computed term by term over the four outcomes."""
        x = (1, 1, 0, 0)
        mu = sum(uk * pk for uk, pk in zip(u.scores, m.pi))
        var = sum((uk - mu) ** 2 * pk for uk, pk in zip(u.scores, m.pi))
        exu = sum(xk * uk * pk for xk, uk, pk in zip(x, u.scores, m.pi))
        cov = exu - m.p * mu
        return mu, var, cov

    def test_reference_case(self):
        u = utility_from_margins(0.10, 0.15)
        m = joint_probs(0.3, 0.5, 0.0)
        mom = utility_moments(u, m)
        assert mom.mu == pytest.approx(0.38)
        assert mom.sigma2 == pytest.approx(0.1156)
        assert mom.cov_xu == pytest.approx(0.126)
        assert (mom.mu, mom.sigma2, mom.cov_xu) == pytest.approx(self.brute_force(u, m))

    def test_response_only_reduces_to_binomial(self):
        u = UtilitySpec(1.0, 1.0, 0.0, 0.0)
        for p, q, phi in [(0.4, 0.7, 0.1), (0.25, 0.5, -0.2)]:
            mom = utility_moments(u, joint_probs(p, q, phi))
            assert mom.mu == pytest.approx(p, abs=1e-12)
            assert mom.sigma2 == pytest.approx(p * (1 - p), abs=1e-12)
            assert mom.cov_xu == pytest.approx(p * (1 - p), abs=1e-12)

    def test_constant_utility(self):
        u = UtilitySpec(0.7, 0.7, 0.7, 0.7)
        mom = utility_moments(u, joint_probs(0.3, 0.6, 0.1))
        assert mom.sigma2 == pytest.approx(0.0, abs=1e-15)
        assert mom.cov_xu == pytest.approx(0.0, abs=1e-15)

    def test_random_models_match_brute_force(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            raw = np.sort(rng.random(4))[::-1]
            u = UtilitySpec(*raw)
            p, q = rng.uniform(0.1, 0.9, 2)
            lo, hi = phi_bounds(p, q)
            phi = rng.uniform(lo, hi)
            m = joint_probs(p, q, phi)
            mom = utility_moments(u, m)
            assert (mom.mu, mom.sigma2, mom.cov_xu) == pytest.approx(
                self.brute_force(u, m), abs=1e-13)


class TestMeanUtilityDecomposed:
    def test_margin_derived_has_zero_eta(self):
        u = utility_from_margins(0.1, 0.15)
        _, eta = mean_utility_decomposed(u, 0.3, 0.5, 0.2)
        assert eta == pytest.approx(0.0, abs=1e-15)

    def test_eta_arithmetic(self):
        u = UtilitySpec(1.0, 0.4, 0.4, 0.0)
        _, eta = mean_utility_decomposed(u, 0.3, 0.5, 0.0)
        assert eta == pytest.approx(0.2)

    def test_matches_moments(self):
        u = utility_from_margins(0.10, 0.15)
        mu, _ = mean_utility_decomposed(u, 0.3, 0.5, 0.2)
        assert mu == pytest.approx(0.6 * 0.3 + 0.4 * 0.5, abs=1e-12)
        rng = np.random.default_rng(7)
        for _ in range(30):
            raw = np.sort(rng.random(4))[::-1]
            u = UtilitySpec(*raw)
            p, q = rng.uniform(0.1, 0.9, 2)
            lo, hi = phi_bounds(p, q)
            phi = rng.uniform(lo, hi)
            mu, _ = mean_utility_decomposed(u, p, q, phi)
            assert mu == pytest.approx(
                utility_moments(u, joint_probs(p, q, phi)).mu, abs=1e-12)


class TestMarginalRateOfSubstitution:
    def test_margin_derived_is_constant_ratio(self):
        u = utility_from_margins(0.10, 0.15)  # r = 2/3
        vals = []
        for p in np.linspace(0.1, 0.9, 20):
            for q in np.linspace(0.1, 0.9, 20):
                lo, hi = phi_bounds(p, q)
                for phi in np.linspace(lo * 0.99, hi * 0.99, 5):
                    vals.append(marginal_rate_of_substitution(u, p, q, phi))
        assert max(vals) - min(vals) < 1e-10
        assert vals[0] == pytest.approx(2 / 3, abs=1e-12)

    def test_symmetric_scores(self):
        u = utility_from_margins(0.15, 0.15)
        assert marginal_rate_of_substitution(u, 0.4, 0.6, 0.1) == pytest.approx(1.0)

    def finite_difference(self, u, p, q, phi, h=1e-6):
        mu = lambda pp, qq: mean_utility_decomposed(u, pp, qq, phi)[0]
        dp = (mu(p + h, q) - mu(p - h, q)) / (2 * h)
        dq = (mu(p, q + h) - mu(p, q - h)) / (2 * h)
        return dq / dp

    def test_against_finite_differences(self):
        u = UtilitySpec(1.0, 0.4, 0.4, 0.0)
        got = marginal_rate_of_substitution(u, 0.3, 0.5, 0.0)
        assert got == pytest.approx(self.finite_difference(u, 0.3, 0.5, 0.0), abs=1e-6)
        rng = np.random.default_rng(3)
        for _ in range(25):
            raw = np.sort(rng.random(4))[::-1]
            u = UtilitySpec(*raw)
            p, q = rng.uniform(0.2, 0.8, 2)
            lo, hi = phi_bounds(p, q)
            phi = rng.uniform(lo * 0.5, hi * 0.5)
            got = marginal_rate_of_substitution(u, p, q, phi)
            assert got == pytest.approx(self.finite_difference(u, p, q, phi), abs=1e-6)
