"""prevmap - voxel-wise activation prevalence maps for multi-subject studies."""

__version__ = "0.1.0"
__description__ = "Voxel-wise activation prevalence maps from multi-subject effect estimates, with FDR masking and validation tools."

# Import main components for convenience
from .core.config import EmOptions, RunConfig
from .core.em import fit_voxel
from .core.mixture import mixture_cdf, mixture_loglik, mixture_pdf
from .core.models import EffectsTable, MixtureParams, VoxelFit

__all__ = [
    "EffectsTable",
    "EmOptions",
    "MixtureParams",
    "RunConfig",
    "VoxelFit",
    "fit_voxel",
    "mixture_cdf",
    "mixture_loglik",
    "mixture_pdf",
]
