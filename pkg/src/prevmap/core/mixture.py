"""
Density, distribution and likelihood of the three-component voxel mixture.
"""

import numpy as np
from numpy.typing import ArrayLike
from scipy import stats
from scipy.special import logsumexp

from .models import MixtureParams


def _component_axes(params: MixtureParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    shape = (3,) + (1,) * x.ndim
    return (
        params.weights.reshape(shape),
        params.means.reshape(shape),
        np.sqrt(params.variances).reshape(shape),
    )


def component_log_densities(params: MixtureParams, x: ArrayLike) -> np.ndarray:
    """Unweighted component log densities, shape ``(3,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    _, loc, scale = _component_axes(params, x)
    return stats.norm.logpdf(x[None, ...], loc=loc, scale=scale)


def mixture_pdf(params: MixtureParams, x: ArrayLike) -> np.ndarray | float:
    """``p1 phi(x; 0, var1) + p2 phi(x; 0, var2) + p3 phi(x; mu, var3)``."""
    x = np.asarray(x, dtype=float)
    weights, loc, scale = _component_axes(params, x)
    dens = (weights * stats.norm.pdf(x[None, ...], loc=loc, scale=scale)).sum(axis=0)
    return float(dens) if np.ndim(dens) == 0 else dens


def mixture_cdf(params: MixtureParams, x: ArrayLike) -> np.ndarray | float:
    """Weighted sum of the three Gaussian distribution functions."""
    x = np.asarray(x, dtype=float)
    weights, loc, scale = _component_axes(params, x)
    cdf = (weights * stats.norm.cdf(x[None, ...], loc=loc, scale=scale)).sum(axis=0)
    cdf = np.clip(cdf, 0.0, 1.0)
    return float(cdf) if cdf.ndim == 0 else cdf


def pointwise_loglik(params: MixtureParams, data: ArrayLike) -> np.ndarray:
    """Per-observation log density, combined in log space."""
    x = np.asarray(data, dtype=float)
    weights = params.weights.reshape((3,) + (1,) * x.ndim)
    return logsumexp(component_log_densities(params, x), axis=0, b=weights)


def mixture_loglik(params: MixtureParams, data: ArrayLike) -> float:
    """Sum of log densities of ``data`` under ``params``.

    Never NaN: the components are combined with log-sum-exp, so extreme
    outliers give a large negative but finite value.
    """
    return float(pointwise_loglik(params, data).sum())
