"""
Tests for efficacies, Pitman efficiency and Monte Carlo power.
"""

import math

import numpy as np
import pytest
from scipy.stats import norm

from prevmap.core.errors import InvariantViolation
from prevmap.services.efficiency import (
    NuisanceSpec,
    efficacy_signed_rank,
    efficacy_t,
    pitman_are,
    power_curve_mc,
    simulate_effects,
)

TOY = NuisanceSpec()
GAUSSIAN_NULL = dict(null_weights=(1.0, 0.0), null_vars=(1.0, 1.0), active_var=1.0)
# Light-tailed bulk with rare wide outliers and a small, tight activation
OUTLIER_NULL = NuisanceSpec(null_weights=(0.9, 0.1), null_vars=(0.05, 2.0), active_mu=0.3, active_var=0.05)


def _closed_form_signed_rank(spec: NuisanceSpec) -> float:
    shift = sum(
        q * norm.cdf(spec.active_mu / math.sqrt(v + spec.active_var))
        for q, v in zip(spec.null_weights, spec.null_vars)
    )
    return 2.0 * (shift - 0.5) / math.sqrt(1.0 / 3.0)


class TestNuisanceSpec:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(InvariantViolation):
            NuisanceSpec(null_weights=(0.5, 0.4))

    def test_variances_must_be_positive(self):
        with pytest.raises(InvariantViolation):
            NuisanceSpec(null_vars=(0.0, 1.0))


class TestEfficacies:
    def test_t_without_shift(self):
        assert efficacy_t(NuisanceSpec(active_mu=0.0)) == 0.0

    def test_t_unit_null(self):
        assert efficacy_t(NuisanceSpec(active_mu=2.0, **GAUSSIAN_NULL)) == pytest.approx(2.0)

    def test_t_toy(self):
        assert efficacy_t(TOY) == pytest.approx(1.0 / math.sqrt(0.252))

    def test_signed_rank_without_shift(self):
        assert efficacy_signed_rank(NuisanceSpec(active_mu=0.0)) == 0.0

    def test_signed_rank_gaussian_closed_form(self):
        spec = NuisanceSpec(active_mu=0.7, **GAUSSIAN_NULL)
        expected = 2.0 * (norm.cdf(0.7 / math.sqrt(2.0)) - 0.5) / math.sqrt(1.0 / 3.0)
        assert efficacy_signed_rank(spec) == pytest.approx(expected, abs=1e-8)

    @pytest.mark.parametrize("spec", [TOY, OUTLIER_NULL, NuisanceSpec(active_mu=-1.5)])
    def test_signed_rank_mixture_closed_form(self, spec):
        assert efficacy_signed_rank(spec) == pytest.approx(_closed_form_signed_rank(spec), abs=1e-8)

    def test_signed_rank_matches_monte_carlo_slope(self):
        # P(X1 + X2 > 0) at small p, estimated with common random numbers
        rng = np.random.default_rng(17)
        n, p = 400_000, 0.05
        u1, u2 = rng.random((n, 3)), rng.random((n, 3))

        def walsh_positive(prob: float) -> float:
            x = simulate_effects(TOY, n, prob, u1) + simulate_effects(TOY, n, prob, u2)
            return float(np.mean(x > 0))

        slope = (walsh_positive(p) - walsh_positive(0.0)) / p
        assert 2.0 * slope / math.sqrt(1.0 / 3.0) == pytest.approx(efficacy_signed_rank(TOY), rel=0.1)


class TestPitmanAre:
    def test_toy_parameters_below_one(self):
        are = pitman_are(TOY)
        assert are < 1.0
        assert are == pytest.approx(0.553, abs=0.01)

    def test_classical_gaussian_limit(self):
        assert pitman_are(NuisanceSpec(active_mu=0.01, **GAUSSIAN_NULL)) == pytest.approx(3 / math.pi, abs=0.01)

    def test_zero_shift(self):
        assert pitman_are(NuisanceSpec(active_mu=0.0)) == 0.0

    def test_scale_invariant(self):
        scaled = NuisanceSpec(
            null_weights=TOY.null_weights,
            null_vars=tuple(4.0 * v for v in TOY.null_vars),
            active_mu=2.0 * TOY.active_mu,
            active_var=4.0 * TOY.active_var,
        )
        assert pitman_are(scaled) == pytest.approx(pitman_are(TOY), rel=1e-7)


class TestPowerCurve:
    def test_size_at_zero_prevalence(self):
        (point,) = power_curve_mc(TOY, n=30, p_grid=[0.0], alpha=0.05, reps=400, seed=1)
        se = math.sqrt(0.05 * 0.95 / 400)
        assert abs(point.power_t - 0.05) <= 3 * se
        assert abs(point.power_wilcoxon - 0.05) <= 3 * se

    def test_t_wins_at_toy_parameters(self):
        # Agrees with the efficiency below one at the toy nuisance parameters
        (point,) = power_curve_mc(TOY, n=64, p_grid=[0.3], alpha=0.05, reps=400, seed=2)
        assert pitman_are(TOY) < 1
        assert point.power_t >= point.power_wilcoxon - max(point.se_t, point.se_wilcoxon)

    def test_signed_rank_wins_with_outliers(self):
        (point,) = power_curve_mc(OUTLIER_NULL, n=64, p_grid=[0.3], alpha=0.05, reps=400, seed=2)
        assert point.power_wilcoxon >= point.power_t - 2 * max(point.se_t, point.se_wilcoxon)

    def test_monotone_in_prevalence(self):
        points = power_curve_mc(TOY, n=20, p_grid=[0.0, 0.2, 0.4, 0.6], reps=300, seed=3)
        for a, b in zip(points, points[1:]):
            assert b.power_t >= a.power_t - 3 * max(a.se_t, b.se_t, 0.01)
            assert b.power_wilcoxon >= a.power_wilcoxon - 3 * max(a.se_wilcoxon, b.se_wilcoxon, 0.01)

    def test_independent_of_worker_count(self):
        serial = power_curve_mc(TOY, n=16, p_grid=[0.0, 0.3], reps=40, seed=4, workers=1)
        parallel = power_curve_mc(TOY, n=16, p_grid=[0.0, 0.3], reps=40, seed=4, workers=2)
        assert serial == parallel

    def test_rejects_invalid_grid(self):
        with pytest.raises(InvariantViolation):
            power_curve_mc(TOY, p_grid=[0.1, 1.2], reps=10)
