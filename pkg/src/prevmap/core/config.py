"""
Configuration management for prevmap.
"""

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml  # type: ignore

from ..utils import constants
from ..utils.helpers import default_workers
from ..utils.logger import get_logger
from .errors import InvariantViolation, ParseError

logger = get_logger(__name__)


@dataclass(frozen=True)
class EmOptions:
    """Tolerances and multi-start settings for the voxel EM fit."""

    max_iter: int = constants.DEFAULT_MAX_ITER
    rel_tol: float = constants.DEFAULT_REL_TOL
    var_floor_frac: float = constants.DEFAULT_VAR_FLOOR_FRAC
    grid_step: float = constants.DEFAULT_GRID_STEP
    top_k_starts: int = constants.DEFAULT_TOP_K_STARTS
    min_active_subjects: float = constants.DEFAULT_MIN_ACTIVE_SUBJECTS
    min_active_var_ratio: float = constants.DEFAULT_MIN_ACTIVE_VAR_RATIO

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise InvariantViolation("max_iter must be positive")
        if not self.rel_tol > 0:
            raise InvariantViolation("rel_tol must be positive")
        if not self.var_floor_frac > 0:
            raise InvariantViolation("var_floor_frac must be positive")
        if not 0 < self.grid_step < 1:
            raise InvariantViolation("grid_step must lie in (0, 1)")
        cells = 1.0 / self.grid_step
        if abs(cells - round(cells)) > 1e-9 * cells:
            raise InvariantViolation(
                f"grid_step {self.grid_step} does not divide 1 into whole cells"
            )
        if self.top_k_starts < 1:
            raise InvariantViolation("top_k_starts must be at least 1")
        if self.min_active_subjects < 0:
            raise InvariantViolation("min_active_subjects must be non-negative")
        if not 0 <= self.min_active_var_ratio < 1:
            raise InvariantViolation("min_active_var_ratio must lie in [0, 1)")

    @property
    def grid_cells(self) -> int:
        """Number of grid cells the unit interval is divided into."""
        return int(round(1.0 / self.grid_step))


# Environment overrides: variable -> (attribute, parser)
_ENV_MAPPINGS: dict[str, tuple[str, Any]] = {
    "PREVMAP_OUTPUT_DIR": ("output_dir", str),
    "PREVMAP_Q_LEVEL": ("q_level", float),
    "PREVMAP_MAX_ITER": ("max_iter", int),
    "PREVMAP_REL_TOL": ("rel_tol", float),
    "PREVMAP_GRID_STEP": ("grid_step", float),
    "PREVMAP_TOP_K": ("top_k", int),
    "PREVMAP_SEED": ("seed", int),
    "PREVMAP_WORKERS": ("workers", int),
    "PREVMAP_ACTIVE_FRACTION": ("active_fraction", float),
    "PREVMAP_SPLITS": ("splits", int),
    "PREVMAP_REPS": ("reps", int),
    "PREVMAP_ALPHA": ("alpha", float),
    "PREVMAP_FWHM": ("fwhm", float),
    "PREVMAP_LOG_LEVEL": ("log_level", str),
}


@dataclass
class RunConfig:
    """Run-level settings shared by every subcommand."""

    output_dir: str = "prevmap-out"
    q_level: float = constants.DEFAULT_Q_LEVEL
    max_iter: int = constants.DEFAULT_MAX_ITER
    rel_tol: float = constants.DEFAULT_REL_TOL
    grid_step: float = constants.DEFAULT_GRID_STEP
    top_k: int = constants.DEFAULT_TOP_K_STARTS
    seed: int = constants.DEFAULT_SEED
    workers: int = field(default_factory=default_workers)
    active_fraction: float = constants.DEFAULT_ACTIVE_FRACTION
    splits: int = constants.DEFAULT_SPLITS
    reps: int = constants.DEFAULT_REPS
    alpha: float = constants.DEFAULT_ALPHA
    fwhm: float = constants.DEFAULT_FWHM
    families: list[str] = field(default_factory=list)
    log_level: str = "INFO"

    @classmethod
    def load(cls, config_path: str | None = None) -> "RunConfig":
        """Load configuration from a JSON/YAML file and environment variables."""
        config = cls()

        if config_path is not None:
            config_file = Path(config_path).expanduser()
            if not config_file.exists():
                raise FileNotFoundError(f"config file not found: {config_file}")
            with open(config_file, encoding="utf-8") as f:
                try:
                    if config_file.suffix in (".yaml", ".yml"):
                        file_config = yaml.safe_load(f) or {}
                    else:
                        file_config = json.load(f)
                except (yaml.YAMLError, json.JSONDecodeError) as e:
                    raise ParseError(f"cannot parse {config_file}: {e}") from e
            if not isinstance(file_config, dict):
                raise InvariantViolation(f"{config_file} must hold a mapping")

            known = {f.name for f in fields(cls)}
            for key, value in file_config.items():
                key = key.replace("-", "_")
                if key in known:
                    setattr(config, key, value)
                else:
                    logger.warning(f"Ignoring unknown config key '{key}' in {config_file}")

        for env_var, (attr_name, parse) in _ENV_MAPPINGS.items():
            env_value = os.getenv(env_var)
            if env_value is None:
                continue
            try:
                setattr(config, attr_name, parse(env_value))
            except ValueError:
                logger.warning(f"Invalid value for {env_var}: {env_value}")

        return config

    def merged(self, overrides: dict[str, Any]) -> "RunConfig":
        """Return a copy with the given (already explicit) values applied."""
        return replace(self, **overrides)

    def validate(self) -> None:
        """Raise InvariantViolation when a setting is out of range."""
        if not 0 < self.q_level < 1:
            raise InvariantViolation(f"q_level must lie in (0, 1), got {self.q_level}")
        if self.workers < 1:
            raise InvariantViolation(f"workers must be at least 1, got {self.workers}")
        if not 0 < self.active_fraction <= 1:
            raise InvariantViolation(
                f"active_fraction must lie in (0, 1], got {self.active_fraction}"
            )
        if not 0 < self.alpha < 1:
            raise InvariantViolation(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.splits < 1 or self.reps < 1:
            raise InvariantViolation("splits and reps must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvariantViolation(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if not (math.isfinite(self.rel_tol) and self.rel_tol > 0):
            raise InvariantViolation("rel_tol must be positive")
        if not (math.isfinite(self.fwhm) and self.fwhm >= 0):
            raise InvariantViolation(f"fwhm must be non-negative, got {self.fwhm}")
        self.em_options()

    def em_options(self) -> EmOptions:
        """EM options derived from this run configuration."""
        return EmOptions(
            max_iter=self.max_iter,
            rel_tol=self.rel_tol,
            grid_step=self.grid_step,
            top_k_starts=self.top_k,
        )

    def save(self, config_path: str) -> None:
        """Save configuration to a JSON file."""
        path = Path(config_path).expanduser()
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)
            f.write("\n")

    def to_dict(self) -> dict[str, Any]:
        """Convert config to dictionary."""
        return asdict(self)
