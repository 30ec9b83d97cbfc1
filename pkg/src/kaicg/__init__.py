"""Knowledge-aided iterative conjugate-gradient DoA estimation for uniform linear arrays."""

__version__ = "0.1.0"

from .baselines import cg_fb_estimate, eigendecompose, esprit_estimate, music_estimate
from .cg import AngleGrid, cg_estimate, cg_residual_basis, cg_spectrum, find_peaks
from .covariance import CovarianceEstimate, SmoothingConfig, fb_average, fbss, refine, sample_covariance
from .kai import KaiConfig, ms_kai_cg, ms_kai_cg_fb
from .signal_model import (ArrayGeometry, ScenarioConfig, SourceSet, array_manifold, generate_snapshots,
                           steering_vector, true_covariance)

__all__ = [
    "AngleGrid", "ArrayGeometry", "CovarianceEstimate", "KaiConfig", "ScenarioConfig", "SmoothingConfig",
    "SourceSet", "array_manifold", "cg_estimate", "cg_fb_estimate", "cg_residual_basis", "cg_spectrum",
    "eigendecompose", "esprit_estimate", "fb_average", "fbss", "find_peaks", "generate_snapshots",
    "ms_kai_cg", "ms_kai_cg_fb", "music_estimate", "refine", "sample_covariance", "steering_vector",
    "true_covariance",
]
