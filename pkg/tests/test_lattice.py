import math
import time
from itertools import product

import numpy as np
import pytest

from doseopt import (ResourceLimitError, UtilitySpec, joint_probs,
                     rationalize_utilities, select_high_prob, selection_split,
                     utility_from_margins, utility_moments, utility_sum_pmf)


def enumeration_pmf(n, pi, scores):
    """Push the full Multinomial(n, pi) support through the score sum."""
    pmf = {}
    for c1, c2, c3 in product(range(n + 1), repeat=3):
        c4 = n - c1 - c2 - c3
        if c4 < 0:
            continue
        coef = (math.factorial(n)
                // (math.factorial(c1) * math.factorial(c2)
                    * math.factorial(c3) * math.factorial(c4)))
        prob = coef * pi[0] ** c1 * pi[1] ** c2 * pi[2] ** c3 * pi[3] ** c4
        key = c1 * scores[0] + c2 * scores[1] + c3 * scores[2] + c4 * scores[3]
        pmf[key] = pmf.get(key, 0.0) + prob
    return pmf


class TestRationalize:
    def test_halves(self):
        lat = rationalize_utilities(utility_from_margins(0.15, 0.15))
        assert (lat.scale, lat.scores) == (2, (2, 1, 1, 0))
        assert not lat.approximate

    def test_fifths(self):
        lat = rationalize_utilities(utility_from_margins(0.10, 0.15))
        assert (lat.scale, lat.scores) == (5, (5, 3, 2, 0))

    def test_response_only(self):
        lat = rationalize_utilities(UtilitySpec(1.0, 1.0, 0.0, 0.0))
        assert (lat.scale, lat.scores) == (1, (1, 1, 0, 0))

    def test_fallback_flagged(self):
        u = UtilitySpec(1.0, 0.123456789, 0.1, 0.0)
        lat = rationalize_utilities(u, max_denominator=50)
        assert lat.approximate
        assert lat.scale == 10 ** 6
        assert lat.scores[1] == 123457


class TestUtilitySumPmf:
    def test_single_patient(self):
        m = joint_probs(0.3, 0.5, 0.0)
        u = utility_from_margins(0.10, 0.15)
        pmf = utility_sum_pmf(1, m, u)
        got = dict(zip(pmf.offsets.tolist(), pmf.masses.tolist()))
        expected = {0: 0.35, 2: 0.35, 3: 0.15, 5: 0.15}
        for k, v in expected.items():
            assert got[k] == pytest.approx(v, abs=1e-15)
        assert sum(got.values()) == pytest.approx(1.0, abs=1e-12)

    def test_two_patients_vs_enumeration(self):
        m = joint_probs(0.3, 0.5, 0.0)
        u = utility_from_margins(0.10, 0.15)
        pmf = utility_sum_pmf(2, m, u)
        oracle = enumeration_pmf(2, m.pi, (5, 3, 2, 0))
        got = dict(zip(pmf.offsets.tolist(), pmf.masses.tolist()))
        for k, v in oracle.items():
            assert got[k] == pytest.approx(v, abs=1e-14)

    def test_random_models_vs_enumeration(self):
        from doseopt import JointOutcomeModel

        rng = np.random.default_rng(11)
        u = utility_from_margins(0.10, 0.15)
        scores = (5, 3, 2, 0)
        for _ in range(10):
            pi = rng.dirichlet(np.ones(4))
            m = JointOutcomeModel(p=pi[0] + pi[1], q=pi[0] + pi[2],
                                  phi=0.0, pi=tuple(pi))
            for n in range(1, 6):
                pmf = utility_sum_pmf(n, m, u)
                oracle = enumeration_pmf(n, pi, scores)
                got = dict(zip(pmf.offsets.tolist(), pmf.masses.tolist()))
                worst = max(abs(got.get(k, 0.0) - v) for k, v in oracle.items())
                assert worst < 1e-12

    def test_moment_identities(self):
        u = utility_from_margins(0.10, 0.15)
        m = joint_probs(0.3, 0.5, 0.0)
        mom = utility_moments(u, m)
        pmf = utility_sum_pmf(46, m, u)
        assert pmf.mean() == pytest.approx(46 * mom.mu, abs=1e-9)
        assert pmf.variance() == pytest.approx(46 * mom.sigma2, abs=1e-9)

    def test_support_cap(self):
        u = utility_from_margins(0.10, 0.15)
        m = joint_probs(0.3, 0.5, 0.0)
        with pytest.raises(ResourceLimitError, match="cap"):
            utility_sum_pmf(100, m, u, max_support=100)


class TestSelection:
    def setup_method(self):
        self.u = utility_from_margins(0.10, 0.15)
        self.m = joint_probs(0.3, 0.5, 0.0)

    def test_threshold_above_range(self):
        pmf = utility_sum_pmf(5, self.m, self.u)
        assert select_high_prob(pmf, pmf, 1.1) == 0.0

    def test_threshold_below_range(self):
        pmf = utility_sum_pmf(5, self.m, self.u)
        assert select_high_prob(pmf, pmf, -1.0 - 1e-9) == pytest.approx(1.0)

    def test_single_patient_hand_enumeration(self):
        # sum over the 16 outcome pairs with U_H > U_L
        pmf = utility_sum_pmf(1, self.m, self.u)
        pi = self.m.pi
        scores = (5, 3, 2, 0)
        expected = sum(pi[i] * pi[j]
                       for i in range(4) for j in range(4)
                       if scores[i] > scores[j])
        assert select_high_prob(pmf, pmf, 0.0) == pytest.approx(expected, abs=1e-14)

    def test_split_partition(self):
        pmf = utility_sum_pmf(12, self.m, self.u)
        p_h, tie, p_l = selection_split(pmf, pmf, 0.0)
        # identical arms: the strict event, the tie, and the reversed strict
        # event partition the whole space
        assert 2 * p_h + tie == pytest.approx(1.0, abs=1e-12)
        assert p_h < 0.5 <= p_h + tie
        assert p_l == pytest.approx(1.0 - p_h)

    def test_mismatched_scale_rejected(self):
        pmf_a = utility_sum_pmf(5, self.m, self.u)
        pmf_b = utility_sum_pmf(5, self.m, utility_from_margins(0.15, 0.15))
        with pytest.raises(ValueError, match="scale"):
            select_high_prob(pmf_a, pmf_b, 0.0)

    def test_mismatched_n_rejected(self):
        pmf_a = utility_sum_pmf(5, self.m, self.u)
        pmf_b = utility_sum_pmf(6, self.m, self.u)
        with pytest.raises(ValueError, match="size"):
            select_high_prob(pmf_a, pmf_b, 0.0)

    def test_lattice_vs_offset_threshold(self):
        # thresholds inside one lattice cell give identical probabilities
        pmf = utility_sum_pmf(9, self.m, self.u)
        k_over_n = 3 / (9 * 5)
        inside = select_high_prob(pmf, pmf, k_over_n + 1e-6)
        at_point = select_high_prob(pmf, pmf, k_over_n)
        assert inside == pytest.approx(at_point, abs=1e-15)

    def test_runtime_n150(self):
        pmf_a = utility_sum_pmf(150, self.m, self.u)
        pmf_b = utility_sum_pmf(150, joint_probs(0.3, 0.35, 0.0), self.u)
        start = time.perf_counter()
        select_high_prob(pmf_a, pmf_b, 0.01)
        assert time.perf_counter() - start < 1.0
