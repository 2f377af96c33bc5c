"""Equilibrium predictions that follow from the binomial band degeneracies alone."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError
from .observables import ReducedSpinState


@dataclass(frozen=True)
class SpectralPoint:
    k: int
    beta: float
    inversion: float


def equilibrium_state(g_k: int, g_k1: int) -> ReducedSpinState:
    """Reduced central state weighting |1> by g_k and |0> by g_k1."""
    if g_k < 1 or g_k1 < 1:
        raise DomainError(f"degeneracies must be >= 1, got ({g_k}, {g_k1})")
    total = g_k + g_k1
    return ReducedSpinState.diagonal(p_up=g_k / total, p_down=g_k1 / total)


def expected_inversion(n_env: int, k: int) -> float:
    """(g_k - g_{k+1}) / (g_k + g_{k+1}), rounded once from the exact rational."""
    _check_band(n_env, k)
    g_k, g_k1 = math.comb(n_env, k), math.comb(n_env, k + 1)
    return float(Fraction(g_k - g_k1, g_k + g_k1))


def spectral_beta(n_env: int, k: int, delta_c: float = 1.0) -> float:
    """Inverse temperature ln(g_{k+1}/g_k) / delta_c for the resonant band pair."""
    _check_band(n_env, k)
    if delta_c <= 0:
        raise DomainError("delta_c must be positive")
    return math.log(Fraction(math.comb(n_env, k + 1), math.comb(n_env, k))) / delta_c


def beta_table(n_env: int, delta_c: float = 1.0) -> list[SpectralPoint]:
    if n_env < 2:
        raise DomainError("beta_table needs N >= 2")
    return [
        SpectralPoint(k, spectral_beta(n_env, k, delta_c), expected_inversion(n_env, k))
        for k in range(n_env)
    ]


def _check_band(n_env: int, k: int) -> None:
    # exact integers throughout, so no overflow guard on n_env here
    if not (0 <= k <= n_env - 1):
        raise DomainError(f"band k={k} outside [0, {n_env - 1}]")
