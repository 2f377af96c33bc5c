"""Hamiltonian builders for the central spin and its spin environment.

Energies are in units of the environment splitting delta_c, hbar = 1.
Full-space operators are stored as CSR matrices; operators on an
accessible subspace are dense.  Two-spin terms are generated directly from
bit operations: a Pauli string flips the bits carrying sigma_x / sigma_y and
picks up a sign (sigma_z) or a phase (sigma_y) read from the input pattern.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, UsageError
from .spin_basis import AccessibleSubspace, FullSpace, build_accessible_subspace, global_flip

DENSE_LIMIT = 4096
PAULI = "xyz"


class CouplingKind(str, enum.Enum):
    GUE = "GUE"
    STAR = "STAR"
    RING_STAR = "RING_STAR"


class RingKind(str, enum.Enum):
    ISING_XX = "ISING_XX"
    XY = "XY"
    HEISENBERG = "HEISENBERG"
    ISING_ZZ = "ISING_ZZ"


class CentralInit(str, enum.Enum):
    UP = "UP"
    SUPERPOSITION = "SUPERPOSITION"


RING_TERMS = {
    RingKind.ISING_XX: ("xx",),
    RingKind.XY: ("xx", "yy"),
    RingKind.HEISENBERG: ("xx", "yy", "zz"),
    RingKind.ISING_ZZ: ("zz",),
}


@dataclass(frozen=True)
class ModelConfig:
    """Physical model and initial-state choice.

    ``gamma`` is the intra-environment ring coupling in units of ``alpha``.
    """

    n_env: int = 10
    k: int = 2
    delta_s: float = 1.0
    delta_c: float = 1.0
    alpha: float = 1.0 / 5000.0
    gamma: float = 0.0
    coupling_kind: CouplingKind = CouplingKind.GUE
    ring_kind: RingKind = RingKind.ISING_XX
    seed: int = 0
    initial_m: int = 0
    central_init: CentralInit = CentralInit.UP

    def __post_init__(self):
        # accept plain strings for the enum fields
        object.__setattr__(self, "coupling_kind", CouplingKind(self.coupling_kind))
        object.__setattr__(self, "ring_kind", RingKind(self.ring_kind))
        object.__setattr__(self, "central_init", CentralInit(self.central_init))
        if self.n_env < 1:
            raise DomainError("n_env must be >= 1")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not (0 <= self.k < self.n_env):
            raise DomainError(f"k={self.k} outside [0, {self.n_env})")
        if self.delta_c <= 0:
            raise DomainError("delta_c must be positive")
        if not (0.9 * self.delta_c < self.delta_s < 1.1 * self.delta_c):
            raise DomainError(f"delta_s={self.delta_s} outside the weak-detuning window")
        if self.gamma < 0:
            raise DomainError("gamma must be >= 0")
        if self.initial_m < 0:
            raise DomainError("initial_m must be >= 0")

    def with_(self, **changes) -> "ModelConfig":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Hermitian operator tagged with the basis it acts on."""

    basis: FullSpace | AccessibleSubspace
    data: np.ndarray | sp.csr_matrix

    def __post_init__(self):
        if self.data.shape != (self.basis.dim, self.basis.dim):
            raise UsageError(f"matrix shape {self.data.shape} does not match basis dim {self.basis.dim}")

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.data)

    def toarray(self) -> np.ndarray:
        return self.data.toarray() if self.is_sparse else np.asarray(self.data)

    def __matmul__(self, vec):
        return self.data @ vec

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if other.basis != self.basis:
            raise UsageError("cannot add operators on different bases")
        if self.is_sparse and other.is_sparse:
            return OperatorMatrix(self.basis, (self.data + other.data).tocsr())
        return OperatorMatrix(self.basis, self.toarray() + other.toarray())

    def scaled(self, factor: float) -> "OperatorMatrix":
        return OperatorMatrix(self.basis, self.data * factor)

    def norm_estimate(self) -> float:
        """Max absolute row sum, an upper bound on the spectral norm."""
        return float(abs(self.data).sum(axis=1).max()) if self.dim else 0.0

    def hermiticity_error(self) -> float:
        diff = self.data - self.data.conj().T
        if sp.issparse(diff):
            return float(abs(diff).max()) if diff.nnz else 0.0
        return float(np.max(np.abs(diff))) if diff.size else 0.0

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        return self.hermiticity_error() <= rtol * max(self.norm_estimate(), 1.0)

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.real(np.vdot(psi, self.data @ psi)))


def _spins(indices: np.ndarray, site: int) -> np.ndarray:
    return ((indices >> site) & 1) * 2 - 1


def pauli_string_coo(n_env: int, ops: dict[int, str], coefficient: complex = 1.0):
    """COO triplets of ``coefficient * prod_site sigma_op(site)`` on the full space.

    ``ops`` maps site (0 = central, 1..N = environment) to 'x', 'y' or 'z'.
    """
    dim = 1 << (n_env + 1)
    cols = np.arange(dim, dtype=np.int64)
    vals = np.full(dim, coefficient, dtype=np.complex128)
    mask = 0
    for site, op in ops.items():
        if not 0 <= site <= n_env:
            raise DomainError(f"site {site} outside [0, {n_env}]")
        if op == "z":
            vals *= _spins(cols, site)
        elif op == "x":
            mask |= 1 << site
        elif op == "y":
            mask |= 1 << site
            vals *= 1j * _spins(cols, site)
        else:
            raise DomainError(f"unknown Pauli label {op!r}")
    return cols ^ mask, cols, vals


def _from_coo(n_env: int, triplets) -> OperatorMatrix:
    dim = 1 << (n_env + 1)
    if triplets:
        rows = np.concatenate([t[0] for t in triplets])
        cols = np.concatenate([t[1] for t in triplets])
        vals = np.concatenate([t[2] for t in triplets])
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0, dtype=np.complex128)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return OperatorMatrix(FullSpace(n_env), mat)


def pauli_operator(n_env: int, ops: dict[int, str], coefficient: complex = 1.0) -> OperatorMatrix:
    return _from_coo(n_env, [pauli_string_coo(n_env, ops, coefficient)])


def magnetization(n_env: int, include_central: bool = True) -> OperatorMatrix:
    """J_z of the environment, optionally plus sigma_z of the central spin."""
    idx = np.arange(1 << (n_env + 1), dtype=np.int64)
    diag = sum(_spins(idx, site) for site in range(1, n_env + 1)).astype(float)
    if include_central:
        diag = diag + _spins(idx, 0)
    return OperatorMatrix(FullSpace(n_env), sp.diags(diag.astype(np.complex128), format="csr"))


def zeeman_hamiltonian(config: ModelConfig) -> OperatorMatrix:
    """H^S + Zeeman part of H^C: (delta_s/2) sigma_z + (delta_c/2) J_z, diagonal."""
    n = config.n_env
    idx = np.arange(1 << (n + 1), dtype=np.int64)
    env = sum(_spins(idx, site) for site in range(1, n + 1))
    diag = 0.5 * config.delta_s * _spins(idx, 0) + 0.5 * config.delta_c * env
    return OperatorMatrix(FullSpace(n), sp.diags(diag.astype(np.complex128), format="csr"))


def sample_gue(dim: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    """Dense GUE matrix with unit mean-square entries, times ``scale``.

    Diagonal entries are real N(0, 1); off-diagonal real and imaginary parts
    are N(0, 1/2) each.
    """
    if dim < 1:
        raise DomainError("GUE dimension must be >= 1")
    g = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    h = (g + g.conj().T) / np.sqrt(2.0)
    return scale * h


def star_coefficients(n_env: int, rng: np.random.Generator) -> np.ndarray:
    """gamma_ij^(nu) as an (N, 3, 3) array of standard normals, (nu, i, j)."""
    return rng.standard_normal((n_env, 3, 3))


def star_coupling(
    config: ModelConfig,
    rng: np.random.Generator | None = None,
    coefficients: np.ndarray | None = None,
) -> OperatorMatrix:
    """alpha * sum_nu sum_ij gamma_ij^(nu) sigma_i(central) sigma_j(nu)."""
    n = config.n_env
    if coefficients is None:
        if rng is None:
            raise UsageError("star_coupling needs an rng or explicit coefficients")
        coefficients = star_coefficients(n, rng)
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape != (n, 3, 3):
        raise UsageError(f"coefficients must have shape {(n, 3, 3)}")
    triplets = []
    for nu in range(n):
        for i, a in enumerate(PAULI):
            for j, b in enumerate(PAULI):
                c = coefficients[nu, i, j]
                if c != 0.0:
                    triplets.append(pauli_string_coo(n, {0: a, nu + 1: b}, config.alpha * c))
    return _from_coo(n, triplets)


def ring_coupling(config: ModelConfig) -> OperatorMatrix:
    """gamma * alpha * sum over the periodic environment ring of the two-spin term."""
    n = config.n_env
    if n < 3:
        raise DomainError(f"a ring needs at least 3 environment spins, got {n}")
    strength = config.gamma * config.alpha
    triplets = []
    if strength != 0.0:
        for nu in range(1, n + 1):
            nxt = nu % n + 1
            for term in RING_TERMS[config.ring_kind]:
                triplets.append(pauli_string_coo(n, {nu: term[0], nxt: term[1]}, strength))
    return _from_coo(n, triplets)


def project(op: OperatorMatrix, subspace: AccessibleSubspace) -> OperatorMatrix:
    """P H P restricted to the subspace members, as a dense matrix."""
    if op.basis != subspace.full:
        raise UsageError("project expects a full-space operator matching the subspace")
    m = subspace.members
    if op.is_sparse:
        block = op.data[m][:, m].toarray()
    else:
        block = np.asarray(op.data)[np.ix_(m, m)]
    return OperatorMatrix(subspace, block.astype(np.complex128))


def conjugate_by_global_flip(op: OperatorMatrix) -> OperatorMatrix:
    """U H U^dagger with U = sigma_x on all N+1 spins (a pure permutation)."""
    if not isinstance(op.basis, FullSpace):
        raise UsageError("global flip acts on full-space operators only")
    perm = global_flip(op.basis.n_env)
    if op.is_sparse:
        data = op.data[perm][:, perm].tocsr()
    else:
        data = np.asarray(op.data)[np.ix_(perm, perm)]
    return OperatorMatrix(op.basis, data)


@dataclass(frozen=True, eq=False)
class Assembly:
    h_total: OperatorMatrix
    h_free: OperatorMatrix
    subspace: AccessibleSubspace
    config: ModelConfig
    star: np.ndarray | None = None

    def projected(self) -> OperatorMatrix:
        """Total Hamiltonian on the accessible subspace."""
        if isinstance(self.h_total.basis, AccessibleSubspace):
            return self.h_total
        return project(self.h_total, self.subspace)


def assemble(config: ModelConfig, rng: np.random.Generator | None = None) -> Assembly:
    """Build H = H^S + H^C + alpha H^int for the configured coupling kind.

    GUE lives on the accessible subspace; STAR and RING_STAR on the full space.
    The random draws come from ``rng`` or, by default, from ``config.seed``.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    subspace = build_accessible_subspace(config.n_env, config.k)
    if subspace.dim == 0:
        raise DomainError("empty accessible subspace")
    zeeman = zeeman_hamiltonian(config)
    if config.coupling_kind is CouplingKind.GUE:
        free = project(zeeman, subspace)
        total = OperatorMatrix(subspace, free.data + sample_gue(subspace.dim, config.alpha, rng))
        return Assembly(total, free, subspace, config)
    coefficients = star_coefficients(config.n_env, rng)
    interaction = star_coupling(config, coefficients=coefficients)
    free = zeeman
    if config.coupling_kind is CouplingKind.RING_STAR:
        free = free + ring_coupling(config)
    return Assembly(free + interaction, free, subspace, config, star=coefficients)
