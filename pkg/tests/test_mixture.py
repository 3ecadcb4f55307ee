"""
Tests for the mixture parameters, density, distribution and likelihood.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from prevmap.core.errors import InvariantViolation
from prevmap.core.mixture import mixture_cdf, mixture_loglik, mixture_pdf
from prevmap.core.models import MixtureParams


def _params(p1, p2, p3, mu=0.0, var1=1.0, var2=1.0, var3=1.0) -> MixtureParams:
    return MixtureParams(p1=p1, p2=p2, p3=p3, mu=mu, var1=var1, var2=var2, var3=var3)


class TestMixtureParams:
    """Construction and canonicalization."""

    def test_null_components_are_ordered_by_variance(self):
        params = _params(0.3, 0.5, 0.2, mu=1.0, var1=4.0, var2=1.0)
        assert (params.p1, params.var1) == (0.5, 1.0)
        assert (params.p2, params.var2) == (0.3, 4.0)

    def test_mu_reported_as_zero_without_active_component(self):
        params = _params(0.5, 0.5, 0.0, mu=2.5)
        assert params.mu == 0.0
        assert params.signed_prevalence == 0.0

    def test_weights_renormalized_within_tolerance(self):
        params = _params(0.5, 0.3, 0.2 + 5e-10)
        assert math.isclose(sum(params.weights), 1.0, abs_tol=1e-15)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"p1": 0.6, "p2": 0.6, "p3": 0.0},
            {"p1": 1.1, "p2": -0.1, "p3": 0.0},
            {"p1": 1.0, "p2": 0.0, "p3": 0.0, "var2": 0.0},
            {"p1": 1.0, "p2": 0.0, "p3": 0.0, "mu": float("nan")},
        ],
    )
    def test_invalid_params_rejected(self, kwargs):
        with pytest.raises(InvariantViolation):
            _params(**kwargs)

    def test_signed_prevalence(self):
        assert _params(0.2, 0.1, 0.7, mu=-2.0).signed_prevalence == -0.7
        assert _params(0.2, 0.1, 0.7, mu=2.0).signed_prevalence == 0.7


class TestMixturePdf:
    def test_standard_normal_at_zero(self):
        assert mixture_pdf(_params(1, 0, 0), 0.0) == pytest.approx(0.398942, abs=1e-6)

    def test_half_weighted_scale_mixture(self):
        params = _params(0.5, 0.5, 0, var2=4.0)
        assert mixture_pdf(params, 0.0) == pytest.approx(0.299207, abs=1e-6)

    def test_vectorized_shape(self):
        x = np.linspace(-3, 3, 7)
        assert mixture_pdf(_params(0.4, 0.4, 0.2, mu=1.0), x).shape == (7,)

    def test_toy_density_integrates_to_one(self):
        p = 0.5
        params = _params(0.88 * (1 - p), 0.12 * (1 - p), p, mu=1.0, var1=0.15, var2=1.0, var3=0.25)
        total, _ = integrate.quad(lambda x: mixture_pdf(params, x), -50, 50, points=[0.0, 1.0], limit=200)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_random_densities_are_normalized(self, rng):
        for _ in range(20):
            w = rng.dirichlet([1.0, 1.0, 1.0])
            v = rng.uniform(0.1, 3.0, size=3)
            params = _params(*w, mu=rng.uniform(-3, 3), var1=v[0], var2=v[1], var3=v[2])
            total, _ = integrate.quad(
                lambda x: mixture_pdf(params, x), -60, 60, points=[0.0, params.mu], limit=200
            )
            assert total == pytest.approx(1.0, abs=1e-6)
            assert np.all(mixture_pdf(params, np.linspace(-10, 10, 101)) >= 0)


class TestMixtureCdf:
    def test_symmetric_null_at_zero(self):
        assert mixture_cdf(_params(0.88, 0.12, 0, var1=0.15), 0.0) == pytest.approx(0.5)

    def test_standard_normal_quantile(self):
        assert mixture_cdf(_params(1, 0, 0), 1.959964) == pytest.approx(0.975, abs=1e-6)

    def test_matches_integrated_pdf(self, rng):
        params = _params(0.5, 0.3, 0.2, mu=2.0, var1=0.25, var2=1.0, var3=0.25)
        for x in rng.uniform(-4, 4, size=5):
            edges = [-40.0] + [b for b in (-2.0, 0.0, 2.0) if b < x] + [float(x)]
            integral = sum(
                integrate.quad(lambda t: mixture_pdf(params, t), lo, hi, epsabs=1e-13)[0]
                for lo, hi in zip(edges[:-1], edges[1:])
            )
            assert mixture_cdf(params, x) == pytest.approx(integral, abs=1e-8)


class TestMixtureLoglik:
    def test_single_point(self):
        assert mixture_loglik(_params(1, 0, 0), [0.0]) == pytest.approx(-0.918939, abs=1e-6)

    def test_additive_over_points(self):
        assert mixture_loglik(_params(1, 0, 0), [0.0, 0.0]) == pytest.approx(-1.837877, abs=1e-6)

    def test_matches_naive_sum(self, rng):
        params = _params(0.5, 0.3, 0.2, mu=2.0, var1=0.25, var2=1.0, var3=0.25)
        data = rng.normal(size=10)
        naive = sum(
            math.log(
                sum(
                    w * math.exp(-0.5 * (x - m) ** 2 / v) / math.sqrt(2 * math.pi * v)
                    for w, m, v in zip(params.weights, params.means, params.variances)
                )
            )
            for x in data
        )
        assert mixture_loglik(params, data) == pytest.approx(naive, rel=1e-9)

    def test_extreme_outlier_is_finite(self):
        value = mixture_loglik(_params(1, 0, 0), [1e10])
        assert math.isfinite(value)
        assert value < -700
