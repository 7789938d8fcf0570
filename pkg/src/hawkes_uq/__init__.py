"""Influence-network inference for multivariate Hawkes processes.

Maximum-likelihood fitting of the excitation matrix with two kinds of
uncertainty quantification: classical asymptotic intervals and
non-asymptotic confidence polyhedra built from a continuous-time
martingale concentration bound on the score.
"""

from hawkes_uq.errors import (
    ConfigError,
    ExplosiveProcess,
    HawkesError,
    Infeasible,
    KernelUnsupported,
    NonFinite,
    NonStationary,
    RateBoundViolation,
    SingularFisher,
)
from hawkes_uq.kernels import Exponential, Gamma, Gaussian, KernelSpec
from hawkes_uq.process import EventSequence, ModelParams

__all__ = [
    "ConfigError",
    "EventSequence",
    "ExplosiveProcess",
    "Exponential",
    "Gamma",
    "Gaussian",
    "HawkesError",
    "Infeasible",
    "KernelSpec",
    "KernelUnsupported",
    "ModelParams",
    "NonFinite",
    "NonStationary",
    "RateBoundViolation",
    "SingularFisher",
]

__version__ = "0.1.0"
