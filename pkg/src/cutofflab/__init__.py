"""Mixing, curvature and cutoff diagnostics for finite Markov chains."""

from .chain_core import Chain, build_chain, lazify, rank_one_perturb, semigroup_apply
from .curvature import CurvatureReport, compute_curvature
from .cutoff import CutoffDiagnostics, width_bounds
from .errors import CutoffLabError, InputError, ResourceError
from .functionals import (
    entropy,
    mixing_time,
    poincare_constant,
    sobolev_upper_estimate,
    spectral_gap,
    varentropy,
    worst_case_tv,
)
from .geometry import hop_metric
from .model_zoo import ModelSpec, build_model
from .transport import wasserstein_1, wasserstein_inf

__version__ = "0.1.0"

__all__ = [
    "Chain", "build_chain", "lazify", "rank_one_perturb", "semigroup_apply",
    "CurvatureReport", "compute_curvature", "CutoffDiagnostics", "width_bounds",
    "CutoffLabError", "InputError", "ResourceError", "entropy", "mixing_time",
    "poincare_constant", "sobolev_upper_estimate", "spectral_gap", "varentropy",
    "worst_case_tv", "hop_metric", "ModelSpec", "build_model", "wasserstein_1",
    "wasserstein_inf",
]
