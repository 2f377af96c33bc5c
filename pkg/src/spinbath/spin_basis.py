"""Product basis of one central spin plus N environment spins.

A full-space basis index is an integer whose bit 0 is the central spin and
whose bits 1..N are the environment spins.  A set bit means sigma_z = +1
(the upper Zeeman level).  Environment patterns are the index shifted right
by one, so ``index = (env << 1) | central``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UsageError

MAX_BINOMIAL_N = 62


def binomial(n: int, k: int) -> int:
    """Exact C(n, k) for 0 <= k <= n <= 62."""
    if not (0 <= n <= MAX_BINOMIAL_N):
        raise DomainError(f"binomial: n={n} outside [0, {MAX_BINOMIAL_N}]")
    if not (0 <= k <= n):
        raise DomainError(f"binomial: k={k} outside [0, n={n}]")
    return math.comb(n, k)


def popcount(values) -> np.ndarray:
    """Vectorized number of set bits of non-negative integers."""
    v = np.asarray(values, dtype=np.int64).copy()
    count = np.zeros_like(v)
    while np.any(v):
        count += v & 1
        v >>= 1
    return count


@dataclass(frozen=True)
class SpinConfiguration:
    """Basis label |s> (x) |env> for N+1 spins."""

    n_env: int
    index: int

    def __post_init__(self):
        if not (0 <= self.index < 1 << (self.n_env + 1)):
            raise DomainError(f"index {self.index} does not fit {self.n_env + 1} spins")

    @property
    def central(self) -> int:
        return self.index & 1

    @property
    def env(self) -> int:
        return self.index >> 1

    @property
    def band(self) -> int:
        return bin(self.env).count("1")

    def spin(self, site: int) -> int:
        """sigma_z eigenvalue (+1/-1) of site 0 (central) .. N."""
        return 1 if (self.index >> site) & 1 else -1


@dataclass(frozen=True)
class BandSpec:
    k: int
    degeneracy: int
    energy: float


def band_spec(n_env: int, k: int, delta_c: float = 1.0) -> BandSpec:
    return BandSpec(k=k, degeneracy=binomial(n_env, k), energy=k * delta_c)


def enumerate_band(n_env: int, k: int) -> np.ndarray:
    """All environment bit patterns of weight k, ascending.

    The position in the returned array is the intra-band label m.
    """
    if not (0 <= k <= n_env):
        raise DomainError(f"band k={k} outside [0, {n_env}]")
    patterns = np.arange(1 << n_env, dtype=np.int64)
    out = patterns[popcount(patterns) == k]
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FullSpace:
    """Basis tag for the complete 2**(N+1) product space."""

    n_env: int

    @property
    def dim(self) -> int:
        return 1 << (self.n_env + 1)


@dataclass(frozen=True, eq=False)
class AccessibleSubspace:
    """Resonant two-band sector spanned by |1>|k,m> and |0>|k+1,m'>.

    ``members`` lists full-space indices: first the C(N,k) states with the
    central spin up, then the C(N,k+1) states with the central spin down.
    """

    n_env: int
    k: int
    members: np.ndarray = field(repr=False)
    n_upper: int = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.members)

    @property
    def n_lower(self) -> int:
        return self.dim - self.n_upper

    @property
    def full(self) -> FullSpace:
        return FullSpace(self.n_env)

    @property
    def central_z(self) -> np.ndarray:
        """sigma_z of the central spin for each member (+1 block, then -1 block)."""
        z = -np.ones(self.dim)
        z[: self.n_upper] = 1.0
        return z

    def index_of(self, full_index: int) -> int:
        hit = np.flatnonzero(self.members == full_index)
        if hit.size == 0:
            raise UsageError(f"full-space index {full_index} is not in the subspace")
        return int(hit[0])

    def __eq__(self, other):
        if not isinstance(other, AccessibleSubspace):
            return NotImplemented
        return (self.n_env, self.k) == (other.n_env, other.k)

    def __hash__(self):
        return hash((AccessibleSubspace, self.n_env, self.k))


def build_accessible_subspace(n_env: int, k: int) -> AccessibleSubspace:
    if n_env < 1:
        raise DomainError("need at least one environment spin")
    if not (0 <= k <= n_env - 1):
        raise DomainError(f"band k={k} has no upper partner band for N={n_env}")
    upper = (enumerate_band(n_env, k) << 1) | 1
    lower = enumerate_band(n_env, k + 1) << 1
    members = np.concatenate([upper, lower])
    members.setflags(write=False)
    return AccessibleSubspace(n_env=n_env, k=k, members=members, n_upper=len(upper))


def embed(amplitudes: np.ndarray, subspace: AccessibleSubspace) -> np.ndarray:
    """Lift subspace amplitudes into the full space (zeros elsewhere)."""
    amplitudes = np.asarray(amplitudes)
    if amplitudes.shape[0] != subspace.dim:
        raise UsageError(
            f"vector of length {amplitudes.shape[0]} does not match subspace dim {subspace.dim}"
        )
    out = np.zeros((subspace.full.dim,) + amplitudes.shape[1:], dtype=np.complex128)
    out[subspace.members] = amplitudes
    return out


def restrict(amplitudes: np.ndarray, subspace: AccessibleSubspace) -> tuple[np.ndarray, float]:
    """Gather subspace amplitudes; also return the norm of what was dropped."""
    amplitudes = np.asarray(amplitudes)
    if amplitudes.shape[0] != subspace.full.dim:
        raise UsageError(
            f"vector of length {amplitudes.shape[0]} does not match full dim {subspace.full.dim}"
        )
    kept = np.array(amplitudes[subspace.members], dtype=np.complex128)
    outside = np.ones(subspace.full.dim, dtype=bool)
    outside[subspace.members] = False
    residual = float(np.linalg.norm(amplitudes[outside]))
    return kept, residual


def global_flip(n_env: int) -> np.ndarray:
    """Index permutation of sigma_x on all N+1 spins: i -> i XOR (2**(N+1) - 1)."""
    dim = 1 << (n_env + 1)
    return np.arange(dim, dtype=np.int64) ^ (dim - 1)
