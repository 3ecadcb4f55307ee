"""
Voxel-wise location tests, Benjamini-Hochberg adjustment and the masked
signed-prevalence map.
"""

from collections.abc import Sequence
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike
from scipy import stats

from ..core.errors import (
    DataTooShort,
    InvariantViolation,
    LengthMismatch,
    TooFewNonzero,
    ZeroVariance,
)
from ..core.models import FdrOutcome, TestMethod, TestResult, VoxelFit
from ..utils.constants import EXACT_SIGNED_RANK_MAX_N, MIN_SIGNED_RANK_NONZERO

SignedRankMethod = Literal["auto", "exact", "normal"]


def _exact_tail_p(doubled_ranks: np.ndarray, observed: int) -> float:
    """Two-sided p-value of the doubled signed-rank sum by full enumeration.

    ``doubled_ranks`` are twice the (mid)ranks, so they are integers even
    under ties; the null distribution of their positive-part sum is built by
    convolving one ``{0, r}`` sign choice at a time.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    n_assignments = counts.sum()
    lower = counts[: observed + 1].sum() / n_assignments
    upper = counts[observed:].sum() / n_assignments
    return float(min(1.0, 2.0 * min(lower, upper)))


def signed_rank_test(
    data: ArrayLike,
    method: SignedRankMethod = "auto",
    min_nonzero: int = MIN_SIGNED_RANK_NONZERO,
) -> TestResult:
    """Two-sided Wilcoxon signed-rank test of symmetry about zero.

    Exact zeros are dropped, tied magnitudes get midranks and the statistic
    is ``W+``, the rank sum of the positive values. With ``method="auto"``
    the null distribution is enumerated exactly for up to 20 non-zero values
    and approximated by a normal with tie-corrected variance and continuity
    correction otherwise.
    """
    x = np.asarray(data, dtype=float).reshape(-1)
    x = x[x != 0]
    n = int(x.size)
    if n < max(1, min_nonzero):
        raise TooFewNonzero(n, max(1, min_nonzero))

    ranks = stats.rankdata(np.abs(x))
    w_plus = float(ranks[x > 0].sum())

    if method == "auto":
        method = "exact" if n <= EXACT_SIGNED_RANK_MAX_N else "normal"

    if method == "exact":
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        p_value = _exact_tail_p(doubled, int(round(2.0 * w_plus)))
        return TestResult(w_plus, p_value, TestMethod.SIGNED_RANK_EXACT, n)

    if method != "normal":
        raise InvariantViolation(f"unknown signed-rank method '{method}'")

    _, tie_counts = np.unique(np.abs(x), return_counts=True)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    z = max(0.0, abs(w_plus - mean) - 0.5) / np.sqrt(var)
    p_value = float(min(1.0, 2.0 * stats.norm.sf(z)))
    return TestResult(w_plus, p_value, TestMethod.SIGNED_RANK_NORMAL, n)


def t_test(data: ArrayLike) -> TestResult:
    """Two-sided one-sample t test against mean zero, ``df = n - 1``."""
    x = np.asarray(data, dtype=float).reshape(-1)
    n = int(x.size)
    if n < 2:
        raise DataTooShort(n, 2)
    sd = float(x.std(ddof=1))
    if sd == 0:
        raise ZeroVariance("t test needs non-zero sample variance")
    result = stats.ttest_1samp(x, 0.0)
    return TestResult(float(result.statistic), float(min(1.0, result.pvalue)), TestMethod.T, n)


def bh_adjust(p_values: ArrayLike, q_level: float) -> FdrOutcome:
    """Benjamini-Hochberg step-up over all given p-values.

    ``q_values[i]`` is the smallest level at which hypothesis ``i`` would be
    rejected; ``reject`` is ``q_values <= q_level``.
    """
    if not 0 < q_level < 1:
        raise InvariantViolation(f"q_level must lie in (0, 1), got {q_level}")
    p = np.asarray(p_values, dtype=float).reshape(-1)
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise InvariantViolation("p-values must lie in [0, 1]")

    m = p.size
    q = np.empty(m)
    if m:
        order = np.argsort(p, kind="stable")
        scaled = p[order] * m / np.arange(1, m + 1)
        stepped = np.minimum.accumulate(scaled[::-1])[::-1]
        q[order] = np.minimum(stepped, 1.0)
    return FdrOutcome(q_values=q, reject=q <= q_level, q_level=q_level)


def signed_prevalence_map(fits: Sequence[VoxelFit], fdr: FdrOutcome) -> np.ndarray:
    """``p3 * sign(mu)`` at rejected, non-thresholded voxels and 0 elsewhere."""
    if len(fits) != fdr.reject.size:
        raise LengthMismatch(f"{len(fits)} fits but {fdr.reject.size} test outcomes")
    values = np.array([fit.params.signed_prevalence for fit in fits], dtype=float)
    keep = fdr.reject & np.array([not fit.thresholded for fit in fits], dtype=bool)
    return np.where(keep, values, 0.0) + 0.0
