"""
Local efficiency of the t and signed-rank tests against the prevalence
alternative, and Monte Carlo power curves.

The alternative moves along ``(1 - p) f1 + p f2`` from ``p = 0``, where ``f1``
is the centred null scale mixture and ``f2 = N(mu, var3)``.
"""

import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats
from scipy.special import ndtri

from ..core.errors import DegenerateAlternative, InvariantViolation, PrevmapError, QuadratureFailure
from ..utils import constants
from ..utils.helpers import keyed_rng, open_unit_uniforms
from ..utils.logger import get_logger
from .inference import signed_rank_test, t_test
from .pipeline import map_rows

logger = get_logger(__name__)

QUAD_TOL = 1e-8
# Efficacies below this are treated as zero
EFFICACY_ZERO = 1e-12
# Asymptotic null SD scale of the projected Walsh-average statistic
SIGNED_RANK_NULL_SD = math.sqrt(1.0 / 3.0)


@dataclass(frozen=True)
class NuisanceSpec:
    """Null scale mixture and active component defining the local path."""

    null_weights: tuple[float, float] = constants.TOY_NULL_WEIGHTS
    null_vars: tuple[float, float] = constants.TOY_NULL_VARS
    active_mu: float = constants.TOY_ACTIVE_MU
    active_var: float = constants.TOY_ACTIVE_VAR

    def __post_init__(self) -> None:
        q1, q2 = (float(q) for q in self.null_weights)
        if min(q1, q2) < 0 or abs(q1 + q2 - 1.0) > 1e-9:
            raise InvariantViolation(f"null weights must be non-negative and sum to 1, got {self.null_weights}")
        if min(self.null_vars) <= 0 or not self.active_var > 0:
            raise InvariantViolation("variances must be positive")
        if not math.isfinite(self.active_mu):
            raise InvariantViolation("active_mu must be finite")
        object.__setattr__(self, "null_weights", (q1, q2))
        object.__setattr__(self, "null_vars", tuple(float(v) for v in self.null_vars))

    @property
    def null_variance(self) -> float:
        q1, q2 = self.null_weights
        v1, v2 = self.null_vars
        return q1 * v1 + q2 * v2

    def null_cdf(self, x: float | np.ndarray) -> float | np.ndarray:
        q1, q2 = self.null_weights
        v1, v2 = self.null_vars
        return q1 * stats.norm.cdf(x, scale=math.sqrt(v1)) + q2 * stats.norm.cdf(x, scale=math.sqrt(v2))

    def active_pdf(self, x: float | np.ndarray) -> float | np.ndarray:
        return stats.norm.pdf(x, loc=self.active_mu, scale=math.sqrt(self.active_var))


def efficacy_t(spec: NuisanceSpec) -> float:
    """``mu / sqrt(q1 v1 + q2 v2)``: slope of the mean in ``p`` over the null SD."""
    return spec.active_mu / math.sqrt(spec.null_variance)


def _quad(func, lo: float, hi: float) -> float:  # type: ignore[no-untyped-def]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(func, lo, hi, epsabs=QUAD_TOL / 10, epsrel=1e-10, limit=200)
        except integrate.IntegrationWarning as e:
            raise QuadratureFailure(str(e)) from e
    if not math.isfinite(value) or abserr > QUAD_TOL:
        raise QuadratureFailure(f"quadrature error estimate {abserr:.3g} above {QUAD_TOL}")
    return float(value)


def efficacy_signed_rank(spec: NuisanceSpec) -> float:
    """Signed-rank efficacy ``2 (int f2 F1 - 1/2) / sqrt(1/3)``.

    The numerator is the slope at ``p = 0`` of ``P(X1 + X2 > 0)`` along the
    mixture path; the integral is split at ``mu`` and evaluated by adaptive
    quadrature.
    """
    if spec.active_mu == 0:
        # f2 symmetric about 0 and F1 - 1/2 odd
        return 0.0

    def integrand(x: float) -> float:
        return float(spec.active_pdf(x) * (spec.null_cdf(x) - 0.5))

    mu = spec.active_mu
    centred = _quad(integrand, -np.inf, mu) + _quad(integrand, mu, np.inf)
    return 2.0 * centred / SIGNED_RANK_NULL_SD


def pitman_are(spec: NuisanceSpec) -> float:
    """Pitman efficiency of the signed-rank test relative to the t test.

    ``(c_W / c_T)^2``, the ratio of sample sizes ``n_T / n_W`` giving equal
    local power. Values above 1 favour the signed-rank test and values below
    1 the t test; for a Gaussian null and vanishing ``mu`` it tends to
    ``3 / pi``.
    """
    c_t = efficacy_t(spec)
    if c_t == 0:
        # mu = 0: no local shift, neither test gains power
        return 0.0
    c_w = efficacy_signed_rank(spec)
    if abs(c_w) < EFFICACY_ZERO:
        raise DegenerateAlternative(
            f"signed-rank efficacy is zero (t: {c_t:.3g}, signed-rank: {c_w:.3g})"
        )
    return (c_w / c_t) ** 2


@dataclass(frozen=True)
class PowerPoint:
    """Monte Carlo rejection rates at one prevalence."""

    p: float
    power_t: float
    se_t: float
    power_wilcoxon: float
    se_wilcoxon: float
    reps: int


def _binomial_se(rate: float, reps: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / reps)


def simulate_effects(spec: NuisanceSpec, n: int, p: float, u: np.ndarray) -> np.ndarray:
    """Effects of ``n`` subjects at prevalence ``p`` from ``(n, 3)`` uniforms.

    Columns select activity, the null component, and the normal deviate, so
    one block of uniforms gives coupled samples across prevalences.
    """
    z = ndtri(u[:, 2])
    sd1, sd2 = (math.sqrt(v) for v in spec.null_vars)
    null = np.where(u[:, 1] < spec.null_weights[0], sd1, sd2) * z
    active = spec.active_mu + math.sqrt(spec.active_var) * z
    return np.where(u[:, 0] < p, active, null)


class _Replicate:
    """Picklable single Monte Carlo replication over the whole prevalence grid."""

    def __init__(self, spec: NuisanceSpec, n: int, p_grid: Sequence[float], alpha: float, seed: int) -> None:
        self.spec = spec
        self.n = n
        self.p_grid = list(p_grid)
        self.alpha = alpha
        self.seed = seed

    def __call__(self, rep: np.ndarray) -> tuple[list[bool], list[bool]]:
        rng = keyed_rng(self.seed, constants.STREAM_POWER, int(rep[0]))
        u = open_unit_uniforms(rng, (self.n, 3))
        t_hits, w_hits = [], []
        for p in self.p_grid:
            x = simulate_effects(self.spec, self.n, p, u)
            t_hits.append(_rejects(t_test, x, self.alpha))
            w_hits.append(_rejects(signed_rank_test, x, self.alpha))
        return t_hits, w_hits


def _rejects(test, x: np.ndarray, alpha: float) -> bool:  # type: ignore[no-untyped-def]
    try:
        return bool(test(x).p_value <= alpha)
    except PrevmapError:
        return False


def power_curve_mc(
    spec: NuisanceSpec,
    n: int = constants.DEFAULT_POWER_N,
    p_grid: Sequence[float] = constants.DEFAULT_P_GRID,
    alpha: float = constants.DEFAULT_ALPHA,
    reps: int = constants.DEFAULT_REPS,
    seed: int = constants.DEFAULT_SEED,
    workers: int = 1,
) -> list[PowerPoint]:
    """Rejection rates of the t and signed-rank tests along a prevalence grid.

    Replication ``r`` draws its uniforms from a stream keyed by
    ``(seed, r)`` and reuses them at every prevalence, so the curves are
    deterministic and coupled across ``p``.
    """
    if n < 2:
        raise InvariantViolation("power simulation needs n >= 2")
    if reps < 1:
        raise InvariantViolation("reps must be positive")
    if not 0 < alpha < 1:
        raise InvariantViolation(f"alpha must lie in (0, 1), got {alpha}")
    if any(not 0 <= p <= 1 for p in p_grid):
        raise InvariantViolation("prevalences must lie in [0, 1]")
    if reps < constants.DEFAULT_REPS:
        logger.info(f"Power curve with {reps} replications; use >= {constants.DEFAULT_REPS} for reported results")

    outcomes = map_rows(
        _Replicate(spec, n, p_grid, alpha, seed),
        np.arange(reps).reshape(-1, 1),
        workers,
    )
    t_hits = np.array([o[0] for o in outcomes], dtype=bool).reshape(reps, len(p_grid))
    w_hits = np.array([o[1] for o in outcomes], dtype=bool).reshape(reps, len(p_grid))

    points = []
    for j, p in enumerate(p_grid):
        rate_t = float(t_hits[:, j].mean())
        rate_w = float(w_hits[:, j].mean())
        points.append(
            PowerPoint(
                p=float(p),
                power_t=rate_t,
                se_t=_binomial_se(rate_t, reps),
                power_wilcoxon=rate_w,
                se_wilcoxon=_binomial_se(rate_w, reps),
                reps=reps,
            )
        )
    return points
