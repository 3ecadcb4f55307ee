"""
Data structures for the toy two-population simulation.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from ..utils import constants
from .errors import EllipseOutOfBounds, InvariantViolation
from .models import EffectsTable, FdrOutcome, MixtureParams, TestResult, VoxelFit

# Jitter draws are truncated at this many standard deviations
JITTER_SIGMAS = 3.0


class ActiveModel(str, Enum):
    """Distribution of effects inside a subject's activation region."""

    GAUSSIAN = "gaussian"
    SCALE_MIXTURE = "scale_mixture"


def _default_null_model() -> MixtureParams:
    return MixtureParams.null(
        p1=constants.TOY_NULL_WEIGHTS[0],
        p2=constants.TOY_NULL_WEIGHTS[1],
        var1=constants.TOY_NULL_VARS[0],
        var2=constants.TOY_NULL_VARS[1],
    )


@dataclass(frozen=True)
class ToySpec:
    """Settings of one toy population.

    Each subject's activation region is an ellipse (ellipsoid for 3D grids)
    whose center and axes are perturbed per subject. ``axes=None`` gives a
    pure-null population. Distribution parameters are variances unless
    ``params_as_sd`` is set, in which case every variance-like number
    (``null_model.var1/var2``, ``active_var``) is read as a standard deviation.
    """

    dims: tuple[int, ...] = constants.DEFAULT_TOY_DIMS
    n_subjects: int = constants.DEFAULT_TOY_SUBJECTS
    center: tuple[float, ...] | None = None
    axes: tuple[float, ...] | None = constants.DEFAULT_TOY_AXES
    center_jitter_sd: float = constants.DEFAULT_CENTER_JITTER_SD
    axes_jitter_sd: float = constants.DEFAULT_AXES_JITTER_SD
    null_model: MixtureParams = field(default_factory=_default_null_model)
    active_model: ActiveModel = ActiveModel.GAUSSIAN
    active_mu: float = constants.TOY_ACTIVE_MU
    active_var: float = constants.TOY_ACTIVE_VAR
    params_as_sd: bool = False
    seed: int = constants.DEFAULT_SEED

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if len(dims) not in (2, 3) or min(dims) < 1:
            raise InvariantViolation(f"toy dims must be 2 or 3 positive integers, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "active_model", ActiveModel(self.active_model))

        if self.n_subjects < 1:
            raise InvariantViolation("n_subjects must be positive")
        if self.center_jitter_sd < 0 or self.axes_jitter_sd < 0:
            raise InvariantViolation("jitter standard deviations must be non-negative")
        if self.null_model.p3 != 0:
            raise InvariantViolation("null model must have no active component")
        if not self.active_var > 0:
            raise InvariantViolation("active_var must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvariantViolation("seed must be an unsigned 64-bit integer")

        center = self.center
        if center is None:
            center = tuple((d - 1) / 2.0 for d in dims)
        center = tuple(float(c) for c in center)
        if len(center) != len(dims):
            raise InvariantViolation(f"center {center} does not match dims {dims}")
        object.__setattr__(self, "center", center)

        if self.axes is not None:
            axes = tuple(float(a) for a in self.axes)
            if len(axes) != len(dims):
                raise InvariantViolation(f"axes {axes} do not match dims {dims}")
            if min(axes) <= 0:
                raise InvariantViolation("ellipse axes must be positive")
            object.__setattr__(self, "axes", axes)
            self._check_bounds()

    def _check_bounds(self) -> None:
        assert self.axes is not None and self.center is not None
        for k, (c, a, d) in enumerate(zip(self.center, self.axes, self.dims)):
            reach = a * (1.0 + JITTER_SIGMAS * self.axes_jitter_sd)
            slack = JITTER_SIGMAS * self.center_jitter_sd
            if c - reach - slack < 0 or c + reach + slack > d - 1:
                raise EllipseOutOfBounds(
                    f"ellipse axis {k} (center {c}, semi-axis {a}) leaves a grid of "
                    f"extent {d} under 3-sigma jitter"
                )

    @property
    def grid_dims(self) -> tuple[int, int, int]:
        """Dims padded to three axes."""
        return (self.dims + (1,) * 3)[:3]  # type: ignore[return-value]

    @property
    def is_null(self) -> bool:
        return self.axes is None

    def _variance(self, value: float) -> float:
        return value * value if self.params_as_sd else value

    @property
    def null_weights(self) -> tuple[float, float]:
        return (self.null_model.p1, self.null_model.p2)

    @property
    def null_variances(self) -> tuple[float, float]:
        return (self._variance(self.null_model.var1), self._variance(self.null_model.var2))

    @property
    def active_weights(self) -> tuple[float, ...]:
        if self.active_model is ActiveModel.GAUSSIAN:
            return (1.0,)
        return constants.TOY_NULL_WEIGHTS

    @property
    def active_variances(self) -> tuple[float, ...]:
        if self.active_model is ActiveModel.GAUSSIAN:
            return (self._variance(self.active_var),)
        return tuple(self._variance(v) for v in constants.TOY_NULL_VARS)

    def to_dict(self) -> dict[str, Any]:
        return {
            "dims": list(self.dims),
            "n_subjects": self.n_subjects,
            "center": list(self.center) if self.center is not None else None,
            "axes": list(self.axes) if self.axes is not None else None,
            "center_jitter_sd": self.center_jitter_sd,
            "axes_jitter_sd": self.axes_jitter_sd,
            "null_weights": list(self.null_weights),
            "null_variances": list(self.null_variances),
            "active_model": self.active_model.value,
            "active_mu": self.active_mu,
            "active_variances": list(self.active_variances),
            "params_as_sd": self.params_as_sd,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class ToyPopulation:
    """Per-subject activation volumes and their exact prevalence."""

    activity: np.ndarray
    true_prevalence: np.ndarray

    @classmethod
    def from_activity(cls, activity: np.ndarray) -> "ToyPopulation":
        activity = np.array(activity, dtype=bool, copy=True)
        if activity.ndim != 4 or activity.shape[0] < 1:
            raise InvariantViolation("activity must be (n_subjects, nx, ny, nz)")
        prevalence = activity.sum(axis=0) / activity.shape[0]
        activity.flags.writeable = False
        prevalence.flags.writeable = False
        return cls(activity=activity, true_prevalence=prevalence)

    @property
    def n_subjects(self) -> int:
        return int(self.activity.shape[0])

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.activity.shape[1:])  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class ToyReport:
    """Outcome of an end-to-end toy run."""

    spec: ToySpec
    q_level: float
    effects: EffectsTable
    true_prevalence: np.ndarray
    estimated_prevalence: np.ndarray
    signed_prevalence: np.ndarray
    fits: list[VoxelFit]
    tests: list[TestResult | None]
    fdr: FdrOutcome
    correlation: float
    mean_abs_error: float
    false_discovery_proportion: float

    @property
    def n_rejected(self) -> int:
        return self.fdr.n_rejected

    def summary(self) -> dict[str, Any]:
        """JSON-ready summary (NaN correlations reported as null)."""

        def clean(value: float) -> float | None:
            return None if math.isnan(value) else float(value)

        return {
            "spec": self.spec.to_dict(),
            "q_level": self.q_level,
            "n_voxels": int(self.true_prevalence.size),
            "n_rejected": self.n_rejected,
            "n_thresholded": sum(1 for f in self.fits if f.thresholded),
            "correlation": clean(self.correlation),
            "mean_abs_error": clean(self.mean_abs_error),
            "false_discovery_proportion": clean(self.false_discovery_proportion),
        }
