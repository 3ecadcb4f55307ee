"""
Voxel-parallel drivers for fitting and testing whole effects tables.

Work is cut into contiguous voxel chunks and mapped with joblib; results come
back in chunk order, so output never depends on the worker count.
"""

import math
from collections.abc import Callable, Sequence
from dataclasses import replace
from typing import Any, TypeVar

import numpy as np
from joblib import Parallel, delayed
from scipy import ndimage

from ..core.config import EmOptions
from ..core.em import fit_voxel
from ..core.errors import InvariantViolation, PrevmapError
from ..core.models import EffectsTable, FdrOutcome, ParameterMapRecord, TestResult, VoxelFit
from ..utils.logger import get_logger
from .inference import signed_rank_test, t_test

logger = get_logger(__name__)

T = TypeVar("T")

ProgressCallback = Callable[[int], None]

# Chunks handed out per worker; more chunks smooth out uneven voxel costs
CHUNKS_PER_WORKER = 8


def _chunks(n_items: int, workers: int) -> list[tuple[int, int]]:
    if n_items == 0:
        return []
    n_chunks = max(1, min(n_items, workers * CHUNKS_PER_WORKER))
    size = math.ceil(n_items / n_chunks)
    return [(start, min(start + size, n_items)) for start in range(0, n_items, size)]


def map_rows(
    func: Callable[[np.ndarray], T],
    rows: np.ndarray,
    workers: int = 1,
    progress: ProgressCallback | None = None,
) -> list[T]:
    """Apply ``func`` to every row of ``rows``, results in row order.

    ``progress`` is called with the number of rows finished after each chunk.
    """
    spans = _chunks(len(rows), workers)
    if workers <= 1 or len(spans) <= 1:
        results: list[T] = []
        for start, stop in spans:
            results.extend(_apply_chunk(func, rows[start:stop]))
            if progress is not None:
                progress(stop - start)
        return results

    parallel = Parallel(n_jobs=workers, return_as="generator")
    outputs = parallel(delayed(_apply_chunk)(func, rows[start:stop]) for start, stop in spans)
    results = []
    for (start, stop), chunk in zip(spans, outputs):
        results.extend(chunk)
        if progress is not None:
            progress(stop - start)
    return results


def _apply_chunk(func: Callable[[np.ndarray], T], rows: np.ndarray) -> list[T]:
    return [func(row) for row in rows]


class _FitRow:
    """Picklable per-row fitter."""

    def __init__(self, opts: EmOptions, apply_constraint: bool = True) -> None:
        self.opts = opts
        self.apply_constraint = apply_constraint

    def __call__(self, row: np.ndarray) -> VoxelFit:
        return fit_voxel(row, self.opts, apply_constraint=self.apply_constraint)


def _signed_rank_or_none(row: np.ndarray) -> TestResult | None:
    try:
        return signed_rank_test(row)
    except PrevmapError:
        return None


def _t_or_zero(row: np.ndarray) -> float:
    try:
        return t_test(row).statistic
    except PrevmapError:
        return 0.0


def fit_table(
    table: EffectsTable,
    opts: EmOptions | None = None,
    workers: int = 1,
    progress: ProgressCallback | None = None,
    apply_constraint: bool = True,
) -> list[VoxelFit]:
    """Mixture fit of every voxel, in voxel-index order.

    With ``apply_constraint`` off the raw best EM fit is kept even where the
    active weight falls below the estimability threshold.
    """
    opts = opts or EmOptions()
    logger.info(f"Fitting {table.n_voxels} voxels with {workers} worker(s)")
    return map_rows(_FitRow(opts, apply_constraint), table.effects, workers, progress)


def signed_rank_table(
    table: EffectsTable,
    workers: int = 1,
    progress: ProgressCallback | None = None,
) -> list[TestResult | None]:
    """Signed-rank test per voxel; None where too few non-zero effects."""
    results = map_rows(_signed_rank_or_none, table.effects, workers, progress)
    skipped = sum(1 for r in results if r is None)
    if skipped:
        logger.warning(f"{skipped} voxel(s) had too few non-zero effects to test")
    return results


def t_table(table: EffectsTable, workers: int = 1) -> np.ndarray:
    """One-sample t statistic per voxel (0 where the variance is zero)."""
    return np.array(map_rows(_t_or_zero, table.effects, workers), dtype=float)


def smoothed_t_table(table: EffectsTable, fwhm: float, workers: int = 1) -> np.ndarray:
    """One-sample t statistic per voxel after Gaussian smoothing of each subject.

    ``fwhm`` is the kernel's full width at half maximum in voxels; singleton
    axes are not smoothed. Out-of-mask voxels carry no weight: each smoothed
    value is normalized by the smoothed mask. ``fwhm = 0`` gives ``t_table``.
    """
    if fwhm < 0:
        raise InvariantViolation(f"fwhm must be non-negative, got {fwhm}")
    if fwhm == 0:
        return t_table(table, workers)

    sigma = fwhm / math.sqrt(8.0 * math.log(2.0))
    axes_sigma = tuple(0.0 if d == 1 else sigma for d in table.dims)
    weight = ndimage.gaussian_filter(table.mask_volume().astype(float), axes_sigma, mode="constant")

    n = table.n_subjects
    flat = np.zeros((table.n_grid, n))
    flat[table.voxel_index] = table.effects
    volumes = flat.reshape(table.dims + (n,), order="F")
    smoothed = ndimage.gaussian_filter(volumes, axes_sigma + (0.0,), mode="constant")
    np.divide(smoothed, weight[..., None], out=smoothed, where=weight[..., None] > 0)
    rows = smoothed.reshape(table.n_grid, n, order="F")[table.voxel_index]
    return np.array(map_rows(_t_or_zero, rows, workers), dtype=float)


def p_values_of(tests: Sequence[TestResult | None]) -> np.ndarray:
    """P-values with untestable voxels set to 1."""
    return np.array([1.0 if t is None else t.p_value for t in tests], dtype=float)


def build_records(
    table: EffectsTable,
    fits: Sequence[VoxelFit],
    tests: Sequence[TestResult | None] | None = None,
    fdr: FdrOutcome | None = None,
    signed: np.ndarray | None = None,
) -> list[ParameterMapRecord]:
    """Parameter-map rows for a table, with test columns when available."""
    coords = table.coordinates()
    records = []
    for row, (idx, fit) in enumerate(zip(table.voxel_index, fits)):
        record = ParameterMapRecord.from_fit(int(idx), tuple(coords[row]), fit)
        extra: dict[str, Any] = {}
        if tests is not None and tests[row] is not None:
            extra["wilcoxon_stat"] = tests[row].statistic  # type: ignore[union-attr]
            extra["p_value"] = tests[row].p_value  # type: ignore[union-attr]
        if fdr is not None:
            extra["q_value"] = float(fdr.q_values[row])
            extra["reject"] = int(fdr.reject[row])
        if signed is not None:
            extra["signed_prevalence"] = float(signed[row])
        if extra:
            record = replace(record, **extra)
        records.append(record)
    return records


def effect_maps(
    table: EffectsTable,
    fits: Sequence[VoxelFit],
    signed: np.ndarray,
    fwhm: float,
    workers: int = 1,
) -> dict[str, np.ndarray]:
    """Masked signed prevalence beside the fitted effect and the group t maps."""
    return {
        "prevalence": np.asarray(signed, dtype=float),
        "mu": np.array([fit.params.mu for fit in fits], dtype=float),
        "t": t_table(table, workers),
        "t_smoothed": smoothed_t_table(table, fwhm, workers),
    }
