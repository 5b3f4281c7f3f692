"""Local times and intersection local times of fBm and Riemann-Liouville
processes: simulation, estimators, moment integrals and rate constants."""
from .errors import (
    DomainError,
    LabError,
    MembershipError,
    NonPSDError,
    RegimeError,
    SizeLimitError,
)
from .simulator.covariance import CovKind, CovModel, ModelParams, compute_c_H

__version__ = "0.1.0"

__all__ = [
    "CovKind",
    "CovModel",
    "DomainError",
    "LabError",
    "MembershipError",
    "ModelParams",
    "NonPSDError",
    "RegimeError",
    "SizeLimitError",
    "compute_c_H",
]
