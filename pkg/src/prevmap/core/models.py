"""
Data structures for the prevalence model.
"""

import math
from dataclasses import dataclass, fields
from enum import Enum
from typing import ClassVar

import numpy as np

from .errors import InvariantViolation

# Weight-sum slack absorbed by renormalization; anything larger is corruption
WEIGHT_RENORM_TOL = 1e-9


@dataclass(frozen=True)
class MixtureParams:
    """Parameters of the three-component voxel mixture.

    ``p1 N(0, var1) + p2 N(0, var2) + p3 N(mu, var3)``, where the first two
    components model the inactive population and ``p3`` is the prevalence of
    activation. Construction canonicalizes: weights are renormalized to sum to
    one, the null components are ordered so that ``var1 <= var2``, and ``mu``
    is reported as 0 when ``p3`` is 0.
    """

    p1: float
    p2: float
    p3: float
    mu: float
    var1: float
    var2: float
    var3: float

    def __post_init__(self) -> None:
        values = {f.name: float(getattr(self, f.name)) for f in fields(self)}
        for name, value in values.items():
            if not math.isfinite(value):
                raise InvariantViolation(f"{name} must be finite, got {value}")

        p1, p2, p3 = (values["p1"], values["p2"], values["p3"])
        if min(p1, p2, p3) < -1e-12:
            raise InvariantViolation(f"negative mixing weight in {(p1, p2, p3)}")
        p1, p2, p3 = max(p1, 0.0), max(p2, 0.0), max(p3, 0.0)
        total = p1 + p2 + p3
        if abs(total - 1.0) > WEIGHT_RENORM_TOL:
            raise InvariantViolation(f"mixing weights sum to {total!r}, not 1")
        p1, p2, p3 = p1 / total, p2 / total, p3 / total

        var1, var2, var3 = values["var1"], values["var2"], values["var3"]
        if min(var1, var2, var3) <= 0:
            raise InvariantViolation(f"variances must be positive, got {(var1, var2, var3)}")
        if var1 > var2:
            p1, p2 = p2, p1
            var1, var2 = var2, var1

        mu = values["mu"] if p3 > 0 else 0.0

        for name, value in (
            ("p1", p1), ("p2", p2), ("p3", p3), ("mu", mu),
            ("var1", var1), ("var2", var2), ("var3", var3),
        ):
            object.__setattr__(self, name, value)

    @classmethod
    def null(cls, p1: float, p2: float, var1: float, var2: float, var3: float = 1.0) -> "MixtureParams":
        """Two-component scale mixture (no active component)."""
        return cls(p1=p1, p2=p2, p3=0.0, mu=0.0, var1=var1, var2=var2, var3=var3)

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.p1, self.p2, self.p3])

    @property
    def means(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.mu])

    @property
    def variances(self) -> np.ndarray:
        return np.array([self.var1, self.var2, self.var3])

    @property
    def null_variance(self) -> float:
        """Unnormalized inactive-population variance ``p1 var1 + p2 var2``."""
        return self.p1 * self.var1 + self.p2 * self.var2

    @property
    def signed_prevalence(self) -> float:
        """``p3 * sign(mu)``."""
        return self.p3 * float(np.sign(self.mu)) + 0.0

    def as_tuple(self) -> tuple[float, ...]:
        return (self.p1, self.p2, self.p3, self.mu, self.var1, self.var2, self.var3)


@dataclass(frozen=True, eq=False)
class EffectsTable:
    """Per-voxel, per-subject effect estimates on a 3D grid.

    ``voxel_index`` holds zero-based linear indices in x-fastest order
    (``x + nx * (y + ny * z)``) of the in-mask voxels; row ``i`` of ``effects``
    belongs to ``voxel_index[i]``.
    """

    dims: tuple[int, int, int]
    voxel_index: np.ndarray
    effects: np.ndarray

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise InvariantViolation(f"dims must be 3 positive integers, got {self.dims}")

        index = np.asarray(self.voxel_index, dtype=np.int64).reshape(-1)
        effects = np.array(self.effects, dtype=float, copy=True)
        if effects.ndim != 2:
            raise InvariantViolation("effects must be a (voxels x subjects) matrix")
        if effects.shape[0] != index.size:
            raise InvariantViolation(
                f"{index.size} voxel indices but {effects.shape[0]} effect rows"
            )
        if effects.shape[1] < 1:
            raise InvariantViolation("effects table has no subjects")

        n_grid = dims[0] * dims[1] * dims[2]
        if index.size:
            if index.min() < 0 or index.max() >= n_grid:
                raise InvariantViolation(f"voxel index outside grid of {n_grid} voxels")
            steps = np.diff(index)
            if np.any(steps == 0):
                dup = int(index[1:][steps == 0][0])
                raise InvariantViolation(f"duplicate voxel index {dup}")
            if np.any(steps < 0):
                raise InvariantViolation("voxel indices must be strictly increasing")
        if not np.all(np.isfinite(effects)):
            raise InvariantViolation("effects contain NaN or infinite values")

        index = index.copy()
        index.flags.writeable = False
        effects.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "voxel_index", index)
        object.__setattr__(self, "effects", effects)

    @classmethod
    def from_volume(cls, volume: np.ndarray, mask: np.ndarray | None = None) -> "EffectsTable":
        """Build a table from a ``(nx, ny, nz, n_subjects)`` array."""
        volume = np.asarray(volume, dtype=float)
        if volume.ndim != 4:
            raise InvariantViolation("volume must be (nx, ny, nz, n_subjects)")
        dims = volume.shape[:3]
        flat = volume.reshape(-1, volume.shape[3], order="F")
        if mask is None:
            index = np.arange(flat.shape[0])
        else:
            index = np.flatnonzero(np.asarray(mask, dtype=bool).ravel(order="F"))
        return cls(dims=dims, voxel_index=index, effects=flat[index])

    @property
    def n_voxels(self) -> int:
        return int(self.voxel_index.size)

    @property
    def n_subjects(self) -> int:
        return int(self.effects.shape[1])

    @property
    def n_grid(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    def coordinates(self) -> np.ndarray:
        """``(n_voxels, 3)`` array of (x, y, z) grid coordinates."""
        return np.column_stack(np.unravel_index(self.voxel_index, self.dims, order="F"))

    def mask_volume(self) -> np.ndarray:
        """Boolean in-mask volume of shape ``dims``."""
        flat = np.zeros(self.n_grid, dtype=bool)
        flat[self.voxel_index] = True
        return flat.reshape(self.dims, order="F")

    def to_volume(self, values: np.ndarray, fill: float = np.nan) -> np.ndarray:
        """Scatter one value per in-mask voxel into a ``dims``-shaped volume."""
        values = np.asarray(values)
        if values.shape[0] != self.n_voxels:
            raise InvariantViolation(
                f"{values.shape[0]} values for {self.n_voxels} voxels"
            )
        dtype = np.result_type(values.dtype, np.asarray(fill).dtype)
        flat = np.full(self.n_grid, fill, dtype=dtype)
        flat[self.voxel_index] = values
        return flat.reshape(self.dims, order="F")

    def select_subjects(self, subjects: np.ndarray) -> "EffectsTable":
        """Table restricted to the given subject columns (in the given order)."""
        return EffectsTable(
            dims=self.dims,
            voxel_index=self.voxel_index,
            effects=self.effects[:, np.asarray(subjects, dtype=int)],
        )


@dataclass(frozen=True)
class VoxelFit:
    """Fitted mixture for one voxel plus EM diagnostics."""

    params: MixtureParams
    loglik: float
    converged: bool
    n_iter: int
    n_starts_tried: int = 1
    thresholded: bool = False
    threshold_value: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.loglik):
            raise InvariantViolation(f"loglik must be finite, got {self.loglik}")
        if self.thresholded and (self.params.p3 != 0 or self.params.mu != 0):
            raise InvariantViolation("thresholded fit must have p3 = 0 and mu = 0")

    @property
    def prevalence(self) -> float:
        return self.params.p3


class TestMethod(Enum):
    """How a voxel-wise p-value was obtained."""

    __test__ = False

    SIGNED_RANK_EXACT = "signed_rank_exact"
    SIGNED_RANK_NORMAL = "signed_rank_normal"
    T = "t"


@dataclass(frozen=True)
class TestResult:
    """Outcome of a one-sample location test at one voxel."""

    __test__: ClassVar[bool] = False

    statistic: float
    p_value: float
    method: TestMethod
    n_effective: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_value <= 1.0:
            raise InvariantViolation(f"p_value {self.p_value} outside [0, 1]")


@dataclass(frozen=True, eq=False)
class FdrOutcome:
    """Benjamini-Hochberg adjusted q-values and rejections."""

    q_values: np.ndarray
    reject: np.ndarray
    q_level: float

    @property
    def n_rejected(self) -> int:
        return int(np.count_nonzero(self.reject))


@dataclass(frozen=True)
class ParameterMapRecord:
    """One row of the parameter-map CSV."""

    HEADER: ClassVar[tuple[str, ...]] = (
        "voxel_index", "x", "y", "z",
        "p1", "p2", "p3", "mu", "var1", "var2", "var3",
        "loglik", "thresholded",
        "wilcoxon_stat", "p_value", "q_value", "reject", "signed_prevalence",
    )
    INT_FIELDS: ClassVar[frozenset[str]] = frozenset(
        {"voxel_index", "x", "y", "z", "thresholded", "reject"}
    )

    voxel_index: int
    x: int
    y: int
    z: int
    p1: float
    p2: float
    p3: float
    mu: float
    var1: float
    var2: float
    var3: float
    loglik: float
    thresholded: int
    wilcoxon_stat: float = float("nan")
    p_value: float = float("nan")
    q_value: float = float("nan")
    reject: int = 0
    signed_prevalence: float = 0.0

    @classmethod
    def from_fit(cls, voxel_index: int, xyz: tuple[int, int, int], fit: VoxelFit) -> "ParameterMapRecord":
        """Record for a fitted voxel, before testing."""
        p = fit.params
        return cls(
            voxel_index=int(voxel_index),
            x=int(xyz[0]), y=int(xyz[1]), z=int(xyz[2]),
            p1=p.p1, p2=p.p2, p3=p.p3, mu=p.mu,
            var1=p.var1, var2=p.var2, var3=p.var3,
            loglik=fit.loglik,
            thresholded=int(fit.thresholded),
        )

    def params(self) -> MixtureParams:
        return MixtureParams(
            p1=self.p1, p2=self.p2, p3=self.p3, mu=self.mu,
            var1=self.var1, var2=self.var2, var3=self.var3,
        )

    def values(self) -> tuple:
        return tuple(getattr(self, name) for name in self.HEADER)
