"""
Activation regions of thresholded maps: connected components, bounding-box
complexity and split-half stability.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike
from scipy import ndimage

from ..core.config import EmOptions
from ..core.errors import DataTooShort, InvariantViolation
from ..core.models import EffectsTable
from ..utils.constants import MIN_SPLIT_SUBJECTS, STREAM_SPLIT_HALF
from ..utils.helpers import keyed_rng
from ..utils.logger import get_logger
from .pipeline import fit_table, t_table

logger = get_logger(__name__)


class MapStatistic(str, Enum):
    """Voxel statistic whose map is thresholded into regions."""

    T = "t"
    PREVALENCE = "prevalence"


@dataclass(frozen=True, eq=False)
class Region:
    """Face-connected set of active voxels.

    ``voxels`` are linear indices in x-fastest order; ``bbox`` holds the
    inclusive ``(min, max)`` coordinate along each axis.
    """

    voxels: np.ndarray
    bbox: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return int(self.voxels.size)

    @property
    def box_volume(self) -> int:
        return math.prod(hi - lo + 1 for lo, hi in self.bbox)

    @property
    def complexity(self) -> float:
        return complexity_ratio(self)


@dataclass(frozen=True)
class RegionSummary:
    n_regions: int
    n_singletons: int
    median_complexity: float | None


def threshold_map(
    values: ArrayLike, active_fraction: float, mask: ArrayLike | None = None
) -> np.ndarray:
    """Mark the ``ceil(active_fraction * m)`` largest in-mask values active.

    ``m`` is the number of in-mask voxels (finite values when no mask is
    given). Ties at the cut go to the lower linear index.
    """
    if not 0 < active_fraction <= 1:
        raise InvariantViolation(f"active_fraction must lie in (0, 1], got {active_fraction}")
    volume = np.asarray(values, dtype=float)
    in_mask = np.isfinite(volume) if mask is None else np.asarray(mask, dtype=bool) & np.isfinite(volume)
    if in_mask.shape != volume.shape:
        raise InvariantViolation(f"mask shape {in_mask.shape} differs from map {volume.shape}")

    index = np.flatnonzero(in_mask.ravel(order="F"))
    m = index.size
    k = min(m, math.ceil(round(active_fraction * m, 9)))
    flat_values = volume.ravel(order="F")[index]
    order = np.lexsort((index, -flat_values))

    active = np.zeros(volume.size, dtype=bool)
    active[index[order[:k]]] = True
    return active.reshape(volume.shape, order="F")


def label_components(mask: ArrayLike) -> list[Region]:
    """Face-connected components, largest first, then by lowest voxel index."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 0:
        raise InvariantViolation("mask must have at least one axis")
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    labels, n_labels = ndimage.label(mask, structure=structure)
    if n_labels == 0:
        return []

    flat_labels = labels.ravel(order="F")
    linear = np.flatnonzero(flat_labels)
    owner = flat_labels[linear]
    order = np.argsort(owner, kind="stable")
    linear, owner = linear[order], owner[order]
    starts = np.searchsorted(owner, np.arange(1, n_labels + 1))
    groups = np.split(linear, starts[1:])

    regions = []
    for voxels in groups:
        coords = np.unravel_index(voxels, mask.shape, order="F")
        bbox = tuple((int(c.min()), int(c.max())) for c in coords)
        regions.append(Region(voxels=voxels, bbox=bbox))
    regions.sort(key=lambda r: (-r.size, int(r.voxels[0])))
    return regions


def complexity_ratio(region: Region) -> float:
    """Region size over the volume of its bounding box."""
    if region.size == 0:
        raise InvariantViolation("complexity of an empty region is undefined")
    return region.size / region.box_volume


def region_summary(mask: ArrayLike) -> RegionSummary:
    """Region count, singleton count and median complexity of non-singletons."""
    regions = label_components(mask)
    ratios = [complexity_ratio(r) for r in regions if r.size > 1]
    return RegionSummary(
        n_regions=len(regions),
        n_singletons=sum(1 for r in regions if r.size == 1),
        median_complexity=float(np.median(ratios)) if ratios else None,
    )


def dice_coefficient(a: ArrayLike, b: ArrayLike) -> float:
    """``2 |A & B| / (|A| + |B|)``; two empty masks agree perfectly."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise InvariantViolation(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.count_nonzero(a & b)) / total


def statistic_map(
    effects: EffectsTable,
    statistic: MapStatistic | str,
    em_opts: EmOptions | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Per-voxel ranking values: ``|t|`` or the fitted active weight ``p3``.

    Both maps rank magnitude so that strong effects of either sign compete
    for the active set. Prevalence ranks the unconstrained weight: the
    thresholded map is exactly zero over most null voxels, and ranking a
    tie that large would hand the cut to voxel order.
    """
    statistic = MapStatistic(statistic)
    if statistic is MapStatistic.T:
        return np.abs(t_table(effects, workers))
    fits = fit_table(effects, em_opts, workers, apply_constraint=False)
    return np.array([fit.params.p3 for fit in fits], dtype=float)


def split_agreement(
    effects: EffectsTable,
    idx_a: ArrayLike,
    idx_b: ArrayLike,
    statistic: MapStatistic | str = MapStatistic.T,
    active_fraction: float = 0.5,
    em_opts: EmOptions | None = None,
    workers: int = 1,
) -> float:
    """Dice agreement of the thresholded maps of two subject groups."""
    masks = []
    for idx in (idx_a, idx_b):
        half = effects.select_subjects(np.asarray(idx, dtype=int))
        values = statistic_map(half, statistic, em_opts, workers)
        masks.append(threshold_map(effects.to_volume(values), active_fraction, effects.mask_volume()))
    return dice_coefficient(masks[0], masks[1])


def split_half_agreement(
    effects: EffectsTable,
    statistic: MapStatistic | str = MapStatistic.T,
    active_fraction: float = 0.5,
    n_splits: int = 10,
    seed: int = 0,
    em_opts: EmOptions | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Dice agreement of maps from random 50/50 subject splits, one per split."""
    n = effects.n_subjects
    if n < MIN_SPLIT_SUBJECTS:
        raise DataTooShort(n, MIN_SPLIT_SUBJECTS)
    if n % 2:
        raise InvariantViolation(f"split-half agreement needs an even subject count, got {n}")
    if n_splits < 1:
        raise InvariantViolation("n_splits must be positive")

    values = np.empty(n_splits)
    for split in range(n_splits):
        perm = keyed_rng(seed, STREAM_SPLIT_HALF, split).permutation(n)
        values[split] = split_agreement(
            effects,
            np.sort(perm[: n // 2]),
            np.sort(perm[n // 2 :]),
            statistic,
            active_fraction,
            em_opts,
            workers,
        )
        logger.debug(f"Split {split}: {MapStatistic(statistic).value} agreement {values[split]:.3f}")
    return values
