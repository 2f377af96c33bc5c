"""Relaxation of a central spin-1/2 coupled to a finite spin-1/2 environment."""

from .errors import (
    CapacityError,
    ConfigError,
    DomainError,
    OutputError,
    PropagationError,
    SpinBathError,
    UsageError,
)
from .hamiltonian import CentralInit, CouplingKind, ModelConfig, RingKind, assemble
from .spin_basis import build_accessible_subspace

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CentralInit",
    "ConfigError",
    "CouplingKind",
    "DomainError",
    "OutputError",
    "ModelConfig",
    "PropagationError",
    "RingKind",
    "SpinBathError",
    "UsageError",
    "assemble",
    "build_accessible_subspace",
]
