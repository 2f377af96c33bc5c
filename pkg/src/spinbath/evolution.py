"""Schrodinger propagation of pure states.

Two routes: exact propagation through a dense eigendecomposition (subspace
sized problems) and a short-recurrence Lanczos propagator for sparse
full-space Hamiltonians.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import CapacityError, DomainError, PropagationError, UsageError
from .hamiltonian import CentralInit, ModelConfig, OperatorMatrix
from .spin_basis import AccessibleSubspace, FullSpace, enumerate_band

log = logging.getLogger(__name__)

DENSE_EIG_CAP = 8192
DEFAULT_SAMPLES = 4096
DEFAULT_ALPHA_TMAX = 60.0


@dataclass(frozen=True, eq=False)
class PureState:
    basis: FullSpace | AccessibleSubspace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.basis.dim,):
            raise UsageError(f"amplitude vector of shape {amps.shape} does not match dim {self.basis.dim}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenpairs of a Hermitian operator.

    ``relative`` holds the eigenvalues measured from ``shift``; they are
    what the exact propagator uses for the phases, so that long times do not
    amplify the rounding error of a large common offset.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    basis: FullSpace | AccessibleSubspace
    shift: float = 0.0
    relative: np.ndarray | None = None

    def __post_init__(self):
        if self.relative is None:
            object.__setattr__(self, "relative", np.asarray(self.eigenvalues) - self.shift)

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def reconstruction_error(self, op: OperatorMatrix) -> float:
        v = self.eigenvectors
        return float(np.linalg.norm(op.toarray() - (v * self.eigenvalues) @ v.conj().T))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Central-spin Bloch vector, energy and norm sampled on a time grid."""

    times: np.ndarray
    bloch: np.ndarray  # (n_times, 3)
    energy: np.ndarray
    norm: np.ndarray

    def __len__(self):
        return len(self.times)

    @property
    def sz(self) -> np.ndarray:
        return self.bloch[:, 2]

    def max_norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm - 1.0)))

    def max_energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))

    def conserves(self, rtol: float = 1e-8, atol: float = 1e-10, norm_tol: float = 1e-10) -> bool:
        e0 = abs(self.energy[0])
        return self.max_energy_drift() <= rtol * e0 + atol and self.max_norm_drift() <= norm_tol


def default_times(alpha: float, n_samples: int = DEFAULT_SAMPLES, alpha_tmax: float = DEFAULT_ALPHA_TMAX,
                  t_max: float | None = None) -> np.ndarray:
    if t_max is None:
        t_max = alpha_tmax / alpha
    if n_samples < 2 or t_max <= 0:
        raise DomainError("time grid needs >= 2 samples and t_max > 0")
    return np.linspace(0.0, t_max, n_samples)


def eigendecompose(op: OperatorMatrix, cap: int = DENSE_EIG_CAP) -> EigenSystem:
    if op.dim > cap:
        raise CapacityError(
            f"dense eigendecomposition of dim {op.dim} exceeds cap {cap}; use propagate_krylov"
        )
    dense = op.toarray()
    shift = float(np.mean(np.real(np.diag(dense)))) if op.dim else 0.0
    relative, vectors = sla.eigh(dense - shift * np.eye(op.dim))
    return EigenSystem(relative + shift, vectors, op.basis, shift, relative)


def iter_exact(eig: EigenSystem, psi0: PureState, times, chunk: int = 512):
    """Yield (times_chunk, states_chunk) with states_chunk of shape (n, dim)."""
    if psi0.basis != eig.basis:
        raise UsageError("initial state and eigensystem live on different bases")
    times = np.asarray(times, dtype=float)
    coeffs = eig.eigenvectors.conj().T @ psi0.amplitudes
    vt = eig.eigenvectors.T
    for start in range(0, len(times), chunk):
        t = times[start : start + chunk]
        phases = np.exp(-1j * np.outer(t, eig.relative)) * np.exp(-1j * eig.shift * t)[:, None]
        states = (phases * coeffs) @ vt
        if start == 0 and len(t) and t[0] == 0.0:
            states[0] = psi0.amplitudes
        yield t, states


def propagate_exact(eig: EigenSystem, psi0: PureState, times) -> np.ndarray:
    """psi(t) = V exp(-i Lambda t) V^dagger psi0 for every t; rows are states."""
    chunks = [s for _, s in iter_exact(eig, psi0, times)]
    if not chunks:
        return np.zeros((0, eig.dim), dtype=np.complex128)
    return np.vstack(chunks)


@dataclass
class KrylovPropagator:
    """exp(-i H dt) psi via Lanczos with a-posteriori error control.

    The Krylov space grows until the local error estimate
    beta_m |[exp(-i T_m tau)]_{m,1}| drops below ``tol`` for the whole
    step; if ``max_krylov`` vectors are not enough, the largest substep tau
    that meets the (time-proportional) tolerance is taken and the
    recurrence restarts from the new state.
    """

    op: OperatorMatrix
    tol: float = 1e-9
    max_krylov: int = 30
    checkpoints: tuple = (4, 8, 12, 16, 20, 25)
    min_substep_fraction: float = 1e-9
    n_matvec: int = field(default=0, init=False)
    n_substeps: int = field(default=0, init=False)
    max_norm_drift: float = field(default=0.0, init=False)

    def __post_init__(self):
        self._scale = max(self.op.norm_estimate(), 1e-300)
        self._fractions = 0.92 ** np.arange(400)
        # largest substep the full Krylov space managed last time; early
        # checkpoints are skipped for longer remainders, they cannot pass
        self._full_tau = np.inf

    @staticmethod
    def _expm_e1(w, s, tau):
        """Columns exp(-i T tau) e_1 for every tau (T = s diag(w) s^T)."""
        tau = np.atleast_1d(tau)
        return s @ (np.exp(-1j * np.outer(w, tau)) * s[0][:, None])

    @staticmethod
    def _tridiag_eig(diag, off):
        if len(diag) == 1:
            return np.array(diag, dtype=float), np.ones((1, 1))
        return sla.eigh_tridiagonal(np.array(diag), np.array(off))

    def _estimate(self, diag, off, b, tau):
        """exp(-i T_m tau) e_1 and a local error estimate for each tau.

        The estimate is the larger of the residual term b |[.]_m| and the
        change against the (m-1)-dimensional approximation; the residual
        term alone is optimistic before the asymptotic regime sets in.
        """
        ev, es = self._tridiag_eig(diag, off)
        coef = self._expm_e1(ev, es, tau)
        err = b * np.abs(coef[-1])
        if len(diag) > 1:
            ev1, es1 = self._tridiag_eig(diag[:-1], off[:-1])
            prev = self._expm_e1(ev1, es1, tau)
            change = np.sqrt(np.sum(np.abs(coef[:-1] - prev) ** 2, axis=0) + np.abs(coef[-1]) ** 2)
            err = np.maximum(err, change)
        return coef, err

    def step(self, psi: np.ndarray, dt: float, step_index: int | None = None) -> np.ndarray:
        if not dt > 0:
            raise DomainError(f"Krylov step needs dt > 0, got {dt}")
        psi = np.asarray(psi, dtype=np.complex128)
        remaining = float(dt)
        while remaining > dt * 1e-14:
            tau, psi = self._substep(psi, remaining, dt, step_index)
            remaining -= tau
        norm = np.linalg.norm(psi)
        drift = abs(norm - 1.0)
        self.max_norm_drift = max(self.max_norm_drift, drift)
        if drift > 1e-10:
            log.warning("Krylov step %s: norm drift %.3e renormalized", step_index, drift)
        return psi / norm

    def _substep(self, psi, remaining, dt, step_index):
        n = psi.shape[0]
        beta0 = np.linalg.norm(psi)
        basis = np.empty((self.max_krylov + 1, n), dtype=np.complex128)
        basis[0] = psi / beta0
        diag, off = [], []
        breakdown = 1e-13 * self._scale
        budget = self.tol * remaining / dt
        for j in range(self.max_krylov):
            w = self.op @ basis[j]
            self.n_matvec += 1
            a = np.real(np.vdot(basis[j], w))
            diag.append(a)
            w = w - a * basis[j]
            if j > 0:
                w = w - off[-1] * basis[j - 1]
            # full reorthogonalization; m <= 30 keeps this cheap
            w = w - np.conj(basis[: j + 1] @ w.conj()) @ basis[: j + 1]
            b = np.linalg.norm(w)
            m = j + 1
            if b < breakdown:
                # invariant subspace: the Krylov result is exact for any tau
                ev, es = self._tridiag_eig(diag, off)
                coef = self._expm_e1(ev, es, remaining)[:, 0]
                self.n_substeps += 1
                return remaining, beta0 * (coef @ basis[:m])
            if m in self.checkpoints and remaining <= self._full_tau:
                coef, err = self._estimate(diag, off, b, remaining)
                if err[0] <= budget:
                    self.n_substeps += 1
                    return remaining, beta0 * (coef[:, 0] @ basis[:m])
            off.append(b)
            basis[j + 1] = w / b
        m = self.max_krylov
        taus = remaining * self._fractions
        taus = taus[taus >= dt * self.min_substep_fraction]
        coefs, err = self._estimate(diag, off[:-1], off[-1], taus)
        ok = err <= self.tol * taus / dt
        if not ok.any():
            raise PropagationError(
                f"Krylov error estimate above tol={self.tol} down to the minimum substep",
                step=step_index,
            )
        i = int(np.argmax(ok))
        self._full_tau = 1.5 * taus[i]
        self.n_substeps += 1
        return taus[i], beta0 * (coefs[:, i] @ basis[:m])


def iter_krylov(op: OperatorMatrix, psi0: PureState, dt: float, n_steps: int, tol: float = 1e-9,
                max_krylov: int = 30):
    """Yield psi0 and then the state after each of ``n_steps`` steps of size dt."""
    if psi0.basis != op.basis:
        raise UsageError("initial state and operator live on different bases")
    prop = KrylovPropagator(op, tol=tol, max_krylov=max_krylov)
    psi = psi0.amplitudes
    yield psi
    for i in range(n_steps):
        psi = prop.step(psi, dt, step_index=i + 1)
        yield psi


def propagate_krylov(op: OperatorMatrix, psi0: PureState, dt: float, n_steps: int, tol: float = 1e-9,
                     max_krylov: int = 30) -> np.ndarray:
    """States at t = 0, dt, ..., n_steps*dt stacked as rows."""
    return np.array(list(iter_krylov(op, psi0, dt, n_steps, tol=tol, max_krylov=max_krylov)))


def make_initial_state(config: ModelConfig, basis: FullSpace | AccessibleSubspace) -> PureState:
    """|1>|k,m> (UP) or (|0>+|1>)/sqrt(2) (x) |k,m> (SUPERPOSITION)."""
    band = enumerate_band(config.n_env, config.k)
    m = config.initial_m
    if m >= len(band):
        raise DomainError(f"initial_m={m} exceeds band size {len(band)}")
    env = int(band[m])
    amps = np.zeros(basis.dim, dtype=np.complex128)
    if config.central_init is CentralInit.SUPERPOSITION:
        if not isinstance(basis, FullSpace):
            raise UsageError("a central superposition leaves the accessible subspace; use the full space")
        amps[env << 1] = amps[(env << 1) | 1] = 1.0 / np.sqrt(2.0)
    elif isinstance(basis, AccessibleSubspace):
        if (basis.n_env, basis.k) != (config.n_env, config.k):
            raise UsageError("subspace does not match the configured band")
        amps[m] = 1.0
    else:
        amps[(env << 1) | 1] = 1.0
    return PureState(basis, amps)
