"""Central-spin reduction, long-time averages and eigenstate statistics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .evolution import EigenSystem, PureState, Trajectory, eigendecompose
from .hamiltonian import OperatorMatrix, project
from .spin_basis import AccessibleSubspace, FullSpace, build_accessible_subspace, popcount, restrict

SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True, eq=False)
class ReducedSpinState:
    """2x2 density matrix of the central spin, rows/columns ordered (up, down)."""

    rho: np.ndarray

    @classmethod
    def diagonal(cls, p_up: float, p_down: float) -> "ReducedSpinState":
        return cls(np.diag([p_up, p_down]).astype(complex))

    @property
    def bloch(self) -> np.ndarray:
        return np.array([np.real(np.trace(SIGMA[a] @ self.rho)) for a in "xyz"])

    @property
    def inversion(self) -> float:
        return float(self.bloch[2])

    def is_physical(self, tol: float = 1e-10) -> bool:
        herm = np.max(np.abs(self.rho - self.rho.conj().T)) <= tol
        trace = abs(np.trace(self.rho) - 1.0) <= tol
        positive = np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min() >= -tol
        return bool(herm and trace and positive and np.linalg.norm(self.bloch) <= 1 + 1e-9)


def central_z(basis: FullSpace | AccessibleSubspace) -> np.ndarray:
    """Diagonal of sigma_z (central spin) in the given basis."""
    if isinstance(basis, AccessibleSubspace):
        return basis.central_z
    return ((np.arange(basis.dim) & 1) * 2 - 1).astype(float)


def bloch_vectors(states: np.ndarray, basis: FullSpace | AccessibleSubspace) -> np.ndarray:
    """Central-spin Bloch vectors of a stack of states (rows), shape (n, 3)."""
    states = np.atleast_2d(states)
    if states.shape[1] != basis.dim:
        raise UsageError(f"states of dim {states.shape[1]} do not match basis dim {basis.dim}")
    out = np.zeros((states.shape[0], 3))
    if isinstance(basis, AccessibleSubspace):
        # both blocks carry orthogonal environment sectors: no coherences
        out[:, 2] = (np.abs(states) ** 2) @ basis.central_z
        return out
    pairs = states.reshape(states.shape[0], -1, 2)
    down, up = pairs[..., 0], pairs[..., 1]
    rho_ud = np.sum(up * down.conj(), axis=1)
    out[:, 0] = 2.0 * rho_ud.real
    out[:, 1] = -2.0 * rho_ud.imag
    out[:, 2] = np.sum(np.abs(up) ** 2, axis=1) - np.sum(np.abs(down) ** 2, axis=1)
    return out


def reduce_central(psi: PureState, tol: float = 1e-8) -> ReducedSpinState:
    """Partial trace over the environment."""
    amps = psi.amplitudes
    if abs(np.linalg.norm(amps) - 1.0) > tol:
        raise UsageError(f"state norm {np.linalg.norm(amps):.12g} is not 1")
    if isinstance(psi.basis, AccessibleSubspace):
        p = np.abs(amps) ** 2
        n_up = psi.basis.n_upper
        return ReducedSpinState.diagonal(p[:n_up].sum(), p[n_up:].sum())
    pairs = amps.reshape(-1, 2)
    up, down = pairs[:, 1], pairs[:, 0]
    rho = np.array(
        [[np.vdot(up, up), np.vdot(down, up)], [np.vdot(up, down), np.vdot(down, down)]]
    )
    return ReducedSpinState(rho)


def make_trajectory(times, states, basis, op: OperatorMatrix) -> Trajectory:
    """Assemble a Trajectory from an iterable of state chunks or a state array.

    ``states`` is either an (n, dim) array or an iterable yielding
    (times_chunk, states_chunk) pairs.
    """
    if isinstance(states, np.ndarray):
        states = [(times, states)]
    blochs, energies, norms = [], [], []
    for _, chunk in states:
        chunk = np.atleast_2d(chunk)
        blochs.append(bloch_vectors(chunk, basis))
        h_chunk = (op.data @ chunk.T).T
        energies.append(np.real(np.sum(chunk.conj() * h_chunk, axis=1)))
        norms.append(np.linalg.norm(chunk, axis=1))
    return Trajectory(
        times=np.asarray(times, dtype=float),
        bloch=np.vstack(blochs),
        energy=np.concatenate(energies),
        norm=np.concatenate(norms),
    )


def to_rotating_frame(bloch: np.ndarray, times, omega: float) -> np.ndarray:
    """Remove the bare precession exp(i omega t) of the transverse components."""
    bloch = np.array(bloch, dtype=float)
    c = (bloch[:, 0] + 1j * bloch[:, 1]) * np.exp(-1j * omega * np.asarray(times))
    bloch[:, 0], bloch[:, 1] = c.real, c.imag
    return bloch


@dataclass(frozen=True)
class TimeAverage:
    """Finite-window Bloch averages with fluctuation and error estimates."""

    mean: np.ndarray
    std: np.ndarray
    stderr: np.ndarray
    mean_all: np.ndarray
    n_samples: int


def _batch_stderr(x: np.ndarray, n_batches: int) -> np.ndarray:
    n = (x.shape[0] // n_batches) * n_batches
    batches = x[:n].reshape(n_batches, -1, x.shape[1]).mean(axis=1)
    return batches.std(axis=0, ddof=1) / np.sqrt(n_batches)


def numeric_time_average(traj: Trajectory, discard_fraction: float = 0.1, n_batches: int = 20) -> TimeAverage:
    """Arithmetic Bloch mean over samples with t >= discard_fraction * t_max.

    The standard error comes from batch means, which accounts for the strong
    time correlation of neighbouring samples.
    """
    if not 0.0 <= discard_fraction < 1.0:
        raise UsageError("discard_fraction must lie in [0, 1)")
    t_cut = traj.times[0] + discard_fraction * (traj.times[-1] - traj.times[0])
    kept = traj.bloch[traj.times >= t_cut]
    if kept.shape[0] < 100:
        raise UsageError(f"only {kept.shape[0]} samples after discard; need >= 100")
    return TimeAverage(
        mean=kept.mean(axis=0),
        std=kept.std(axis=0),
        stderr=_batch_stderr(kept, n_batches),
        mean_all=traj.bloch.mean(axis=0),
        n_samples=kept.shape[0],
    )


def _degenerate_groups(values: np.ndarray, gap_tol: float):
    """Split ascending eigenvalues into runs separated by more than gap_tol."""
    breaks = np.flatnonzero(np.diff(values) > gap_tol) + 1
    return np.split(np.arange(len(values)), breaks)


def _sigma_z_adapted(eig: EigenSystem, rel_gap: float = 1e-10) -> np.ndarray:
    """Eigenvectors rotated to diagonalize sigma_z inside each degenerate eigenspace."""
    z = central_z(eig.basis)
    scale = max(np.max(np.abs(eig.eigenvalues)), 1.0) if eig.dim else 1.0
    vecs = eig.eigenvectors
    rotated = None
    for group in _degenerate_groups(eig.eigenvalues, rel_gap * scale):
        if len(group) < 2:
            continue
        if rotated is None:
            rotated = vecs.copy()
        block = vecs[:, group]
        _, u = np.linalg.eigh(block.conj().T @ (z[:, None] * block))
        rotated[:, group] = block @ u
    return vecs if rotated is None else rotated


def diagonal_ensemble_average(eig: EigenSystem, psi0: PureState) -> float:
    """Infinite-time average of the central sigma_z: sum_n |<e_n|psi0>|^2 lambda_z,n."""
    if psi0.basis != eig.basis:
        raise UsageError("initial state and eigensystem live on different bases")
    vecs = _sigma_z_adapted(eig)
    weights = np.abs(vecs.conj().T @ psi0.amplitudes) ** 2
    lambdas = (np.abs(vecs) ** 2).T @ central_z(eig.basis)
    return float(weights @ lambdas)


def sector_diagonal_average(op: OperatorMatrix, psi: PureState) -> float:
    """Long-time sigma_z average of a full-space state, sector by sector.

    The state is split into total-magnetization sectors; each sector is
    propagated by the projected Hamiltonian, and cross-sector coherences
    (rotating at Zeeman frequencies) average out.  Sector M (1 <= M <= N) is
    exactly the accessible subspace with lower band M - 1.
    """
    if isinstance(psi.basis, AccessibleSubspace):
        if op.basis != psi.basis:
            op = project(op, psi.basis)
        return diagonal_ensemble_average(eigendecompose(op), psi)
    n = psi.basis.n_env
    amps = psi.amplitudes
    weights = np.abs(amps) ** 2
    sector = popcount(np.arange(psi.basis.dim))
    total = 0.0
    for m in np.unique(sector[weights > 0]):
        if 1 <= m <= n:
            sub = build_accessible_subspace(n, int(m) - 1)
            part, _ = restrict(amps, sub)
            w = float(np.vdot(part, part).real)
            piece = PureState(sub, part / np.sqrt(w))
            total += w * diagonal_ensemble_average(eigendecompose(project(op, sub)), piece)
        else:
            # all-down or all-up: one-dimensional sector
            total += float(weights[sector == m].sum()) * (1.0 if m else -1.0)
    return total


@dataclass(frozen=True, eq=False)
class LambdaZSample:
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        return float(np.std(self.values))

    def mass_below(self, threshold: float) -> float:
        return float(np.mean(self.values < threshold))


def eigenstate_lambdas(eig: EigenSystem, metadata: dict | None = None) -> LambdaZSample:
    """sigma_z Bloch component of the reduced state of every eigenvector."""
    vecs = _sigma_z_adapted(eig)
    lam = (np.abs(vecs) ** 2).T @ central_z(eig.basis)
    lam = np.clip(lam, -1.0, 1.0)
    return LambdaZSample(lam, dict(metadata or {}))


def histogram(values, bin_width: float = 0.02, value_range=(-1.0, 1.0)):
    """Counts on half-open bins [lo + i*w, lo + (i+1)*w).

    Values at or beyond the upper edge land in the last bin and values below
    the lower edge in the first, so the counts always sum to len(values).
    """
    if not bin_width > 0:
        raise UsageError("bin_width must be positive")
    lo, hi = value_range
    n_bins = max(int(round((hi - lo) / bin_width)), 1)
    centers = lo + bin_width * (np.arange(n_bins) + 0.5)
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        return centers, np.zeros(n_bins, dtype=np.int64)
    idx = np.floor((values - lo) / bin_width + 1e-9).astype(np.int64)
    idx = np.clip(idx, 0, n_bins - 1)
    return centers, np.bincount(idx, minlength=n_bins)
