"""
Tests for the location tests, BH adjustment and signed-prevalence masking.
"""

import numpy as np
import pytest

from prevmap.core.errors import InvariantViolation, LengthMismatch, TooFewNonzero, ZeroVariance
from prevmap.core.models import FdrOutcome, MixtureParams, TestMethod, VoxelFit
from prevmap.services.inference import bh_adjust, signed_prevalence_map, signed_rank_test, t_test

# Largest rank sum of the negative values still significant at two-sided 0.05
CRITICAL_T = {6: 0, 7: 2, 8: 3, 9: 5, 10: 8}


def _ranked_data(n: int, negative_sum: int) -> np.ndarray:
    """Magnitudes 1..n with a set of ranks summing to ``negative_sum`` negated."""
    x = np.arange(1, n + 1, dtype=float)
    remaining = negative_sum
    for r in range(n, 0, -1):
        if r <= remaining:
            x[r - 1] = -x[r - 1]
            remaining -= r
    assert remaining == 0
    return x


class TestSignedRank:
    def test_small_sample_enumeration(self):
        result = signed_rank_test([1.0, 2.0, 3.0], min_nonzero=1)
        assert result.statistic == 6.0
        assert result.p_value == pytest.approx(0.25)
        assert result.method is TestMethod.SIGNED_RANK_EXACT

    def test_requires_enough_nonzero_values(self):
        with pytest.raises(TooFewNonzero):
            signed_rank_test([1.0, 2.0, 3.0, 0.0, 0.0, 0.0])

    def test_antisymmetric_data_centres_statistic(self):
        result = signed_rank_test([-2.0, -1.0, 1.0, 2.0, -3.0, 3.0])
        assert result.statistic == pytest.approx(10.5)
        assert result.p_value >= 0.99

    def test_zeros_are_dropped(self):
        result = signed_rank_test([0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        assert result.n_effective == 6

    @pytest.mark.parametrize("n,critical", sorted(CRITICAL_T.items()))
    def test_matches_critical_value_table(self, n, critical):
        assert signed_rank_test(_ranked_data(n, critical)).p_value <= 0.05
        assert signed_rank_test(_ranked_data(n, critical + 1)).p_value > 0.05

    def test_five_values_never_significant(self):
        assert signed_rank_test([1.0, 2.0, 3.0, 4.0, 5.0]).p_value == pytest.approx(0.0625)

    def test_normal_approximation_close_to_exact_at_twenty(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            x = rng.normal(0.3, 1.0, size=20)
            exact = signed_rank_test(x, method="exact").p_value
            approx = signed_rank_test(x, method="normal").p_value
            assert abs(exact - approx) < 0.01

    def test_auto_switches_to_normal_above_twenty(self, rng):
        assert signed_rank_test(rng.normal(size=21)).method is TestMethod.SIGNED_RANK_NORMAL

    def test_scale_and_sign_flip(self, rng):
        x = rng.normal(0.5, 1.0, size=15)
        base = signed_rank_test(x)
        n = base.n_effective
        assert signed_rank_test(3.7 * x).p_value == pytest.approx(base.p_value)
        flipped = signed_rank_test(-x)
        assert flipped.statistic == pytest.approx(n * (n + 1) / 2 - base.statistic)
        assert flipped.p_value == pytest.approx(base.p_value)

    def test_unknown_method(self, rng):
        with pytest.raises(InvariantViolation):
            signed_rank_test(rng.normal(size=10), method="bootstrap")  # type: ignore[arg-type]


class TestTTest:
    def test_zero_variance(self):
        with pytest.raises(ZeroVariance):
            t_test([1.0, 1.0, 1.0, 1.0])

    def test_symmetric_data(self):
        result = t_test([-1.0, 1.0])
        assert result.statistic == 0.0
        assert result.p_value == pytest.approx(1.0)

    def test_textbook_value(self):
        result = t_test([1.0, 2.0, 3.0, 4.0, 5.0])
        assert result.statistic == pytest.approx(3.0 / np.sqrt(0.5), rel=1e-12)
        assert result.p_value == pytest.approx(0.0132, abs=1e-4)

    def test_scale_invariant(self, rng):
        x = rng.normal(0.2, 1.0, size=30)
        assert t_test(x).p_value == pytest.approx(t_test(0.01 * x).p_value)


class TestBenjaminiHochberg:
    def test_step_up(self):
        outcome = bh_adjust([0.01, 0.04, 0.03, 0.20], 0.1)
        assert outcome.reject.tolist() == [True, True, True, False]
        np.testing.assert_allclose(outcome.q_values, [0.04, 0.0533333333, 0.0533333333, 0.2])

    def test_all_ones(self):
        outcome = bh_adjust(np.ones(5), 0.05)
        assert outcome.n_rejected == 0
        np.testing.assert_array_equal(outcome.q_values, np.ones(5))

    def test_single_hypothesis(self):
        assert bh_adjust([0.05], 0.05).reject.tolist() == [True]

    def test_empty(self):
        assert bh_adjust([], 0.1).n_rejected == 0

    @pytest.mark.parametrize("q_level", [0.0, 1.0, -0.1])
    def test_invalid_level(self, q_level):
        with pytest.raises(InvariantViolation):
            bh_adjust([0.1], q_level)

    def test_invalid_p_value(self):
        with pytest.raises(InvariantViolation):
            bh_adjust([0.1, 1.2], 0.1)


class TestSignedPrevalenceMap:
    def _fit(self, p3: float, mu: float, thresholded: bool = False) -> VoxelFit:
        rest = (1.0 - p3) / 2
        params = MixtureParams(p1=rest, p2=rest, p3=p3, mu=mu, var1=1.0, var2=2.0, var3=1.0)
        return VoxelFit(params=params, loglik=-10.0, converged=True, n_iter=3, thresholded=thresholded)

    def test_masking(self):
        fits = [self._fit(0.7, -2.0), self._fit(0.7, 2.0), self._fit(0.0, 0.0, thresholded=True)]
        fdr = FdrOutcome(
            q_values=np.array([0.01, 0.5, 0.01]),
            reject=np.array([True, False, True]),
            q_level=0.1,
        )
        np.testing.assert_array_equal(signed_prevalence_map(fits, fdr), [-0.7, 0.0, 0.0])

    def test_length_mismatch(self):
        fdr = bh_adjust([0.01, 0.02], 0.1)
        with pytest.raises(LengthMismatch):
            signed_prevalence_map([self._fit(0.5, 1.0)], fdr)
