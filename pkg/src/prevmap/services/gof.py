"""
Held-out goodness of fit of candidate effect distributions.

Every candidate family is fitted per voxel on a training half of the subjects
and scored with the Kolmogorov-Smirnov distance on the other half.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike
from scipy import stats

from ..core.config import EmOptions
from ..core.em import fit_scale_mixture, fit_voxel
from ..core.errors import DataTooShort, InvariantViolation, PrevmapError, ZeroVariance
from ..core.mixture import mixture_cdf
from ..core.models import EffectsTable, MixtureParams
from ..utils.constants import MIN_FIT_OBSERVATIONS, MIN_SPLIT_SUBJECTS, STREAM_GOF_SPLIT
from ..utils.helpers import keyed_rng
from ..utils.logger import get_logger
from .pipeline import map_rows

logger = get_logger(__name__)

CdfFunction = Callable[[np.ndarray], np.ndarray]

TUKEY_FENCE = 1.5


class CandidateFamily(str, Enum):
    """Distribution families compared on held-out data."""

    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    CAUCHY = "cauchy"
    LOGISTIC = "logistic"
    GAUSSIAN_SCALE_MIXTURE_2 = "gaussian_scale_mixture_2"
    GAUSSIAN_MIXTURE_3 = "gaussian_mixture_3"


LOCATION_SCALE_FAMILIES = {
    CandidateFamily.GAUSSIAN: stats.norm,
    CandidateFamily.LAPLACE: stats.laplace,
    CandidateFamily.CAUCHY: stats.cauchy,
    CandidateFamily.LOGISTIC: stats.logistic,
}


@dataclass(frozen=True)
class FittedCandidate:
    """A fitted family, usable as a distribution function."""

    family: CandidateFamily
    location: float = 0.0
    scale: float = 1.0
    mixture: MixtureParams | None = None

    def cdf(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.mixture is not None:
            return np.asarray(mixture_cdf(self.mixture, x))
        dist = LOCATION_SCALE_FAMILIES[self.family]
        return np.asarray(dist.cdf(x, loc=self.location, scale=self.scale))

    def __call__(self, x: ArrayLike) -> np.ndarray:
        return self.cdf(x)


def estimate_location_scale(family: CandidateFamily, data: ArrayLike) -> tuple[float, float]:
    """Closed-form (location, scale) estimates for the simple families.

    gaussian: mean and unbiased standard deviation; laplace: median and mean
    absolute deviation from it; cauchy: median and half the interquartile
    range; logistic: mean and ``sqrt(3 var) / pi``.
    """
    family = CandidateFamily(family)
    x = np.asarray(data, dtype=float).reshape(-1)
    if x.size < 2:
        raise DataTooShort(x.size, 2)

    if family is CandidateFamily.GAUSSIAN:
        location, scale = float(x.mean()), float(x.std(ddof=1))
    elif family is CandidateFamily.LAPLACE:
        location = float(np.median(x))
        scale = float(np.mean(np.abs(x - location)))
    elif family is CandidateFamily.CAUCHY:
        location = float(np.median(x))
        q1, q3 = np.percentile(x, [25, 75])
        scale = float(q3 - q1) / 2.0
    elif family is CandidateFamily.LOGISTIC:
        location = float(x.mean())
        scale = float(np.sqrt(3.0 * x.var(ddof=1)) / np.pi)
    else:
        raise InvariantViolation(f"{family.value} is not a location-scale family")

    if not scale > 0:
        raise ZeroVariance(f"{family.value} scale estimate is zero")
    return location, scale


def fit_candidate(
    family: CandidateFamily, data: ArrayLike, opts: EmOptions | None = None
) -> FittedCandidate:
    """Fit one candidate family to a voxel's training effects.

    The two mixture families use EM: the centred scale mixture keeps both
    means at zero, the three-component mixture is the unconstrained voxel fit.
    """
    family = CandidateFamily(family)
    x = np.asarray(data, dtype=float).reshape(-1)
    if x.size < MIN_FIT_OBSERVATIONS:
        raise DataTooShort(x.size, MIN_FIT_OBSERVATIONS)
    if np.ptp(x) == 0:
        raise ZeroVariance("cannot fit a distribution to constant data")

    opts = opts or EmOptions()
    if family is CandidateFamily.GAUSSIAN_SCALE_MIXTURE_2:
        return FittedCandidate(family, mixture=fit_scale_mixture(x, opts).params)
    if family is CandidateFamily.GAUSSIAN_MIXTURE_3:
        return FittedCandidate(family, mixture=fit_voxel(x, opts, apply_constraint=False).params)

    location, scale = estimate_location_scale(family, x)
    return FittedCandidate(family, location=location, scale=scale)


def ks_statistic(data: ArrayLike, cdf: CdfFunction) -> float:
    """Kolmogorov-Smirnov distance between the empirical cdf of ``data`` and ``cdf``."""
    x = np.sort(np.asarray(data, dtype=float).reshape(-1))
    n = x.size
    if n == 0:
        raise InvariantViolation("KS statistic needs at least one observation")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = max(float(np.max(i / n - f)), float(np.max(f - (i - 1) / n)))
    return float(np.clip(d, 0.0, 1.0))


@dataclass(frozen=True)
class FamilySummary:
    """Box-plot statistics of one family's KS values across voxels."""

    family: CandidateFamily
    n: int
    n_missing: int
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float

    @classmethod
    def from_values(cls, family: CandidateFamily, values: np.ndarray) -> "FamilySummary":
        present = values[~np.isnan(values)]
        missing = int(values.size - present.size)
        if present.size == 0:
            nan = float("nan")
            return cls(family, 0, missing, nan, nan, nan, nan, nan)
        q1, median, q3 = (float(v) for v in np.percentile(present, [25, 50, 75]))
        iqr = q3 - q1
        low = present[present >= q1 - TUKEY_FENCE * iqr].min()
        high = present[present <= q3 + TUKEY_FENCE * iqr].max()
        return cls(family, int(present.size), missing, median, q1, q3, float(low), float(high))


@dataclass(frozen=True, eq=False)
class GofResult:
    """Per-voxel, per-family KS table (NaN where a fit failed)."""

    voxel_index: np.ndarray
    families: list[CandidateFamily]
    ks: np.ndarray
    train: np.ndarray
    test: np.ndarray

    def median(self, family: CandidateFamily) -> float:
        col = self.families.index(CandidateFamily(family))
        values = self.ks[:, col]
        values = values[~np.isnan(values)]
        return float(np.median(values)) if values.size else float("nan")

    def summaries(self) -> list[FamilySummary]:
        """Per-family summaries sorted by median (families with no values last)."""
        rows = [FamilySummary.from_values(f, self.ks[:, j]) for j, f in enumerate(self.families)]
        return sorted(rows, key=lambda s: (bool(np.isnan(s.median)), np.nan_to_num(s.median)))


def split_subjects(n_subjects: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded 50/50 partition of subject columns into (train, test)."""
    perm = keyed_rng(seed, STREAM_GOF_SPLIT).permutation(n_subjects)
    half = n_subjects // 2
    return np.sort(perm[:half]), np.sort(perm[half:])


class _ScoreRow:
    """Picklable per-voxel scorer."""

    def __init__(
        self,
        families: Sequence[CandidateFamily],
        train: np.ndarray,
        test: np.ndarray,
        opts: EmOptions,
    ) -> None:
        self.families = list(families)
        self.train = train
        self.test = test
        self.opts = opts

    def __call__(self, row: np.ndarray) -> list[float]:
        scores = []
        for family in self.families:
            try:
                fitted = fit_candidate(family, row[self.train], self.opts)
                scores.append(ks_statistic(row[self.test], fitted.cdf))
            except PrevmapError as e:
                logger.debug(f"{family.value} fit failed: {e}")
                scores.append(float("nan"))
        return scores


def gof_compare(
    effects: EffectsTable,
    families: Sequence[CandidateFamily | str] | None = None,
    split_seed: int = 0,
    opts: EmOptions | None = None,
    workers: int = 1,
) -> GofResult:
    """Fit every family on a training half and score it on the other half.

    Failures at single voxels become NaN entries instead of aborting.
    """
    if effects.n_subjects < MIN_SPLIT_SUBJECTS:
        raise DataTooShort(effects.n_subjects, MIN_SPLIT_SUBJECTS)
    chosen = [CandidateFamily(f) for f in (families or list(CandidateFamily))]
    if not chosen:
        raise InvariantViolation("no candidate families selected")

    train, test = split_subjects(effects.n_subjects, split_seed)
    scorer = _ScoreRow(chosen, train, test, opts or EmOptions())
    rows = map_rows(scorer, effects.effects, workers)
    ks = np.array(rows, dtype=float).reshape(effects.n_voxels, len(chosen))

    failed = int(np.isnan(ks).sum())
    if failed:
        logger.warning(f"{failed} voxel/family fit(s) failed and were left missing")
    return GofResult(
        voxel_index=effects.voxel_index,
        families=chosen,
        ks=ks,
        train=train,
        test=test,
    )
