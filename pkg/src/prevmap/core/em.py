"""
Voxel-wise estimation of the prevalence mixture.

Each voxel is fitted by EM started from the best solutions of the moment
equations over a grid of null weights ``(p1, p2)``; the prevalence is then
zeroed wherever it falls below the estimability threshold.
"""

from dataclasses import replace

import numpy as np
from numpy.typing import ArrayLike
from scipy import stats
from scipy.special import logsumexp

from ..utils.constants import MIN_FIT_OBSERVATIONS
from ..utils.logger import get_logger
from .config import EmOptions
from .errors import DataTooShort, InvariantViolation
from .mixture import mixture_loglik
from .models import MixtureParams, VoxelFit

logger = get_logger(__name__)

MU_DEGENERACY = 1e-10
ASCENT_TOL = 1e-9
FALLBACK_WEIGHTS = (0.45, 0.45, 0.1)
FALLBACK_MU_CLAMP = 3.0


def _as_data(data: ArrayLike) -> np.ndarray:
    x = np.asarray(data, dtype=float).reshape(-1)
    if x.size < MIN_FIT_OBSERVATIONS:
        raise DataTooShort(x.size, MIN_FIT_OBSERVATIONS)
    if not np.all(np.isfinite(x)):
        raise InvariantViolation("effects contain NaN or infinite values")
    return x


def raw_moments(data: ArrayLike) -> np.ndarray:
    """First four raw sample moments ``m1..m4``."""
    x = np.asarray(data, dtype=float)
    return np.array([np.mean(x**k) for k in (1, 2, 3, 4)])


def _reference_variance(x: np.ndarray) -> float:
    s2 = float(x.var(ddof=1)) if x.size > 1 else 0.0
    if s2 > 0:
        return s2
    mean = float(x.mean()) if x.size else 0.0
    return mean * mean if mean != 0 else 1.0


def variance_floor(data: ArrayLike, opts: EmOptions) -> float:
    """Smallest variance any component may take on this voxel."""
    return opts.var_floor_frac * _reference_variance(np.asarray(data, dtype=float))


def _moment_roots(
    p1: np.ndarray, p2: np.ndarray, moments: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Solve the moment equations for arrays of null weights.

    Returns ``(mu, var3, var1, var2, ok)`` where ``var1``, ``var2`` and ``ok``
    have a leading axis of length 2, one entry per quadratic root.
    """
    m1, m2, m3, m4 = (float(m) for m in moments)
    p3 = 1.0 - p1 - p2

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        mu = m1 / p3
        var3 = (m3 / p3 - mu**3) / (3.0 * mu)
        # p1 var1 + p2 var2 = a_lin and p1 var1^2 + p2 var2^2 = b_quad
        a_lin = m2 - p3 * (mu**2 + var3)
        b_quad = (m4 - p3 * (mu**4 + 6.0 * mu**2 * var3 + 3.0 * var3**2)) / 3.0

        a = p1 * (p1 + p2)
        b = -2.0 * a_lin * p1
        c = a_lin**2 - b_quad * p2
        disc = b * b - 4.0 * a * c
        root = np.sqrt(np.where(disc >= 0, disc, np.nan))
        var1 = np.stack([(-b - root) / (2.0 * a), (-b + root) / (2.0 * a)])
        var2 = (a_lin - p1 * var1) / p2

        # One null component only: the linear equation fixes the shared variance
        only_p2 = (p1 == 0) & (p2 > 0)
        only_p1 = (p2 == 0) & (p1 > 0)
        single_p2 = a_lin / p2
        single_p1 = a_lin / p1
        var1 = np.where(only_p2, single_p2, np.where(only_p1, single_p1, var1))
        var2 = np.where(only_p2, single_p2, np.where(only_p1, single_p1, var2))

    base_ok = (
        (p1 >= 0) & (p2 >= 0) & (p3 > 0) & (p1 + p2 > 0)
        & (np.abs(mu) >= MU_DEGENERACY)
        & np.isfinite(var3) & (var3 > 0)
    )
    ok = (
        base_ok[None, :]
        & np.isfinite(var1) & np.isfinite(var2)
        & (var1 > 0) & (var2 > 0)
    )
    return mu, var3, var1, var2, ok


def _candidate_logliks(
    x: np.ndarray,
    p1: np.ndarray,
    p2: np.ndarray,
    mu: np.ndarray,
    var1: np.ndarray,
    var2: np.ndarray,
    var3: np.ndarray,
    ok: np.ndarray,
) -> np.ndarray:
    """Log-likelihood of every candidate (``-inf`` where infeasible)."""
    safe = lambda v: np.where(ok, v, 1.0)  # noqa: E731
    v1, v2, v3 = safe(var1), safe(var2), safe(np.broadcast_to(var3, ok.shape))
    m3 = safe(np.broadcast_to(mu, ok.shape))
    w1 = np.broadcast_to(p1, ok.shape)
    w2 = np.broadcast_to(p2, ok.shape)
    w3 = 1.0 - w1 - w2

    # Axes: (component, root, grid point, observation)
    loc = np.stack([np.zeros_like(m3), np.zeros_like(m3), m3])[..., None]
    scale = np.sqrt(np.stack([v1, v2, v3]))[..., None]
    weights = np.stack([w1, w2, w3])[..., None]
    logd = stats.norm.logpdf(x.reshape((1,) * (ok.ndim + 1) + (-1,)), loc=loc, scale=scale)
    ll = logsumexp(logd, axis=0, b=weights).sum(axis=-1)
    return np.where(ok, ll, -np.inf)


def solve_moments_given_weights(
    p1: float,
    p2: float,
    moments: ArrayLike,
    data: ArrayLike | None = None,
) -> MixtureParams | None:
    """Moment-equation solution of the mixture for fixed null weights.

    With ``p3 = 1 - p1 - p2``: ``mu = m1 / p3``, ``var3`` from the third
    moment, and ``(var1, var2)`` from the linear second-moment and quadratic
    fourth-moment equations. Returns None when the system has no admissible
    solution. When both roots are admissible, the one with the higher
    likelihood on ``data`` wins; without data, the root whose variances are
    already ordered ``var1 <= var2`` wins.
    """
    if p1 < 0 or p2 < 0 or p1 + p2 >= 1:
        return None

    moments = np.asarray(moments, dtype=float)
    a1, a2 = np.array([float(p1)]), np.array([float(p2)])
    mu, var3, var1, var2, ok = _moment_roots(a1, a2, moments)
    roots = [r for r in (0, 1) if ok[r, 0]]
    if not roots:
        return None
    if len(roots) == 2 and var1[0, 0] == var1[1, 0]:
        roots = [0]

    def build(r: int) -> MixtureParams:
        return MixtureParams(
            p1=p1, p2=p2, p3=1.0 - p1 - p2, mu=float(mu[0]),
            var1=float(var1[r, 0]), var2=float(var2[r, 0]), var3=float(var3[0]),
        )

    if len(roots) == 1:
        return build(roots[0])

    if data is not None:
        x = np.asarray(data, dtype=float)
        candidates = [build(r) for r in roots]
        scores = [mixture_loglik(c, x) for c in candidates]
        return candidates[int(np.argmax(scores))]

    ordered = [r for r in roots if var1[r, 0] <= var2[r, 0]]
    return build(ordered[0] if ordered else roots[0])


def _fallback_start(x: np.ndarray, opts: EmOptions) -> MixtureParams:
    s2 = float(x.var(ddof=1))
    ref = _reference_variance(x)
    floor = opts.var_floor_frac * ref
    s = float(np.sqrt(ref))
    p1, p2, p3 = FALLBACK_WEIGHTS
    mu = float(np.clip(x.mean() / p3, -FALLBACK_MU_CLAMP * s, FALLBACK_MU_CLAMP * s))
    return MixtureParams(
        p1=p1, p2=p2, p3=p3, mu=mu,
        var1=max(0.5 * s2, floor), var2=max(2.0 * s2, floor), var3=max(s2, floor),
    )


def moment_init_grid(data: ArrayLike, opts: EmOptions) -> list[MixtureParams]:
    """Best moment-equation starts over the ``(p1, p2)`` grid.

    Grid points are ``(i, j) * grid_step`` with ``i, j >= 1`` and
    ``p1 + p2 <= 1 - grid_step``. Feasible solutions are ranked by
    log-likelihood on ``data`` and the top ``top_k_starts`` returned; when no
    grid point is feasible a single fallback start is returned.
    """
    x = _as_data(data)
    k = opts.grid_cells
    i, j = np.meshgrid(np.arange(1, k), np.arange(1, k), indexing="ij")
    keep = (i + j) <= k - 1
    p1 = i[keep] / k
    p2 = j[keep] / k

    mu, var3, var1, var2, ok = _moment_roots(p1, p2, raw_moments(x))
    ll = _candidate_logliks(x, p1, p2, mu, var1, var2, var3, ok)
    best_root = np.argmax(ll, axis=0)
    cols = np.arange(p1.size)
    best_ll = ll[best_root, cols]
    feasible = np.flatnonzero(np.isfinite(best_ll))

    if feasible.size == 0:
        logger.debug("No feasible moment solution on the grid; using fallback start")
        return [_fallback_start(x, opts)]

    order = feasible[np.argsort(-best_ll[feasible], kind="stable")]
    starts = []
    for g in order[: opts.top_k_starts]:
        r = best_root[g]
        starts.append(
            MixtureParams(
                p1=float(p1[g]), p2=float(p2[g]), p3=1.0 - float(p1[g]) - float(p2[g]),
                mu=float(mu[g]), var1=float(var1[r, g]), var2=float(var2[r, g]),
                var3=float(var3[g]),
            )
        )
    return starts


def _log_densities(x: np.ndarray, w: np.ndarray, mean: np.ndarray, var: np.ndarray) -> np.ndarray:
    """Weighted component log densities, shape ``(3, n)``."""
    with np.errstate(divide="ignore"):
        log_w = np.log(w)
    logpdf = stats.norm.logpdf(x[None, :], loc=mean[:, None], scale=np.sqrt(var)[:, None])
    return log_w[:, None] + logpdf


def _e_step(logd: np.ndarray) -> tuple[float, np.ndarray]:
    """Log-likelihood and responsibilities from weighted log densities."""
    per_point = logsumexp(logd, axis=0)
    return float(per_point.sum()), np.exp(logd - per_point[None, :])


def em_fit(
    data: ArrayLike,
    init: MixtureParams,
    opts: EmOptions,
    trace: list[float] | None = None,
) -> VoxelFit:
    """Run EM from ``init`` until the log-likelihood settles.

    Iteration stops once the log-likelihood changes by at most ``rel_tol``
    per observation.

    The two null components keep their mean at 0; the active component
    updates mean then variance. After every iteration the null labels are
    reordered so ``var1 <= var2`` and all variances are floored at
    ``var_floor_frac`` times the sample variance. A component whose weight
    reaches zero stays at zero. When ``trace`` is given, the log-likelihood
    after each iteration is appended to it.
    """
    x = _as_data(data)
    floor = variance_floor(x, opts)
    x2 = x * x

    w = init.weights.copy()
    mean = init.means.copy()
    var = np.maximum(init.variances, floor)

    ll_prev, _ = _e_step(_log_densities(x, w, mean, var))
    # Per-observation change, so rescaling the data cannot move the stop
    tolerance = opts.rel_tol * x.size
    converged = False
    n_iter = 0

    for iteration in range(1, opts.max_iter + 1):
        _, gamma = _e_step(_log_densities(x, w, mean, var))
        nk = gamma.sum(axis=1)
        w = nk / x.size

        for comp in (0, 1):
            if nk[comp] > 0:
                var[comp] = float(gamma[comp] @ x2) / nk[comp]
        if nk[2] > 0:
            mean[2] = float(gamma[2] @ x) / nk[2]
            resid = x - mean[2]
            var[2] = float(gamma[2] @ (resid * resid)) / nk[2]

        if var[0] > var[1]:
            w[[0, 1]] = w[[1, 0]]
            var[[0, 1]] = var[[1, 0]]
        var = np.maximum(var, floor)

        ll, _ = _e_step(_log_densities(x, w, mean, var))
        n_iter = iteration
        if trace is not None:
            trace.append(ll)
        assert ll >= ll_prev - ASCENT_TOL * max(1.0, abs(ll_prev)), (
            f"EM log-likelihood decreased from {ll_prev!r} to {ll!r}"
        )

        change = abs(ll - ll_prev)
        ll_prev = ll
        if change <= tolerance:
            converged = True
            break

    params = MixtureParams(
        p1=float(w[0]), p2=float(w[1]), p3=float(w[2]), mu=float(mean[2]),
        var1=float(var[0]), var2=float(var[1]), var3=float(var[2]),
    )
    return VoxelFit(
        params=params,
        loglik=mixture_loglik(params, x),
        converged=converged,
        n_iter=n_iter,
        n_starts_tried=1,
        thresholded=False,
        threshold_value=donoho_threshold(params),
    )


def fit_scale_mixture(
    data: ArrayLike,
    opts: EmOptions,
    init: MixtureParams | None = None,
) -> VoxelFit:
    """EM fit of the centred two-component Gaussian scale mixture (``p3 = 0``)."""
    x = _as_data(data)
    floor = variance_floor(x, opts)
    if init is not None and init.p1 + init.p2 > 0:
        total = init.p1 + init.p2
        p1, p2 = init.p1 / total, init.p2 / total
        var1, var2, var3 = init.var1, init.var2, init.var3
    else:
        s2 = float(x.var(ddof=1))
        p1 = p2 = 0.5
        var1, var2 = max(0.5 * s2, floor), max(2.0 * s2, floor)
        var3 = max(s2, floor)
    start = MixtureParams.null(p1=p1, p2=p2, var1=var1, var2=var2, var3=var3)
    return em_fit(x, start, opts)


def donoho_threshold(params: MixtureParams) -> float:
    """Estimability threshold ``exp(-mu^2 / (2 (p1 var1 + p2 var2)))``.

    Prevalences below this value cannot be told apart from the null
    population. It is 1 when ``mu = 0`` and grows with the null variance.
    """
    null_var = params.null_variance
    mu = params.mu
    if null_var == 0:
        return 0.0 if mu != 0 else 1.0
    return float(np.exp(-(mu * mu) / (2.0 * null_var)))


def is_degenerate_active(params: MixtureParams, n: int, opts: EmOptions) -> bool:
    """Whether the active component collapsed onto a handful of subjects.

    It is degenerate when it carries fewer than ``min_active_subjects``
    expected subjects, or when its variance is below
    ``min_active_var_ratio`` times the per-subject null variance
    ``(p1 var1 + p2 var2) / (p1 + p2)``. Both tests are scale-free.
    """
    if params.p3 == 0:
        return False
    if params.p3 * n < opts.min_active_subjects:
        return True
    null_weight = params.p1 + params.p2
    if null_weight == 0:
        return False
    return params.var3 < opts.min_active_var_ratio * params.null_variance / null_weight


def apply_prevalence_constraint(fit: VoxelFit, data: ArrayLike, opts: EmOptions) -> VoxelFit:
    """Zero the prevalence of ``fit`` when it is below the threshold.

    A degenerate active component (see :func:`is_degenerate_active`) is
    zeroed as well. A thresholded voxel is re-fitted as a two-component null
    scale mixture so that the reported parameters form a coherent null model.
    """
    x = np.asarray(data, dtype=float).reshape(-1)
    threshold = donoho_threshold(fit.params)
    if not fit.params.p3 < threshold and not is_degenerate_active(fit.params, x.size, opts):
        return replace(fit, threshold_value=threshold)

    null_fit = fit_scale_mixture(x, opts, init=fit.params)
    return VoxelFit(
        params=null_fit.params,
        loglik=null_fit.loglik,
        converged=null_fit.converged,
        n_iter=fit.n_iter + null_fit.n_iter,
        n_starts_tried=fit.n_starts_tried,
        thresholded=True,
        threshold_value=threshold,
    )


def fit_voxel(
    data: ArrayLike,
    opts: EmOptions | None = None,
    apply_constraint: bool = True,
) -> VoxelFit:
    """Fit the prevalence mixture to one voxel's effects.

    Multi-start EM from the moment-grid starts, keeping the highest
    log-likelihood, then the estimability constraint (unless
    ``apply_constraint`` is False). The data is sorted first, so the result
    does not depend on subject order.
    """
    opts = opts or EmOptions()
    x = np.sort(_as_data(data))

    starts = moment_init_grid(x, opts)
    best: VoxelFit | None = None
    for start in starts:
        fit = em_fit(x, start, opts)
        if best is None or fit.loglik > best.loglik:
            best = fit
    assert best is not None
    best = replace(best, n_starts_tried=len(starts))

    if not apply_constraint:
        return best
    return apply_prevalence_constraint(best, x, opts)
