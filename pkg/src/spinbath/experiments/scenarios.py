"""Scenario runners: single trajectories, detuning scans, gamma sweeps,
eigenstate ensembles and dual (negative-temperature) runs."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..errors import DomainError, SpinBathError, UsageError
from ..evolution import (
    PureState,
    Trajectory,
    EigenSystem,
    default_times,
    eigendecompose,
    iter_exact,
    iter_krylov,
    make_initial_state,
)
from ..hamiltonian import (
    Assembly,
    CentralInit,
    CouplingKind,
    ModelConfig,
    OperatorMatrix,
    assemble,
    conjugate_by_global_flip,
    project,
)
from ..observables import (
    LambdaZSample,
    TimeAverage,
    diagonal_ensemble_average,
    eigenstate_lambdas,
    histogram,
    make_trajectory,
    numeric_time_average,
    sector_diagonal_average,
    to_rotating_frame,
)
from ..spin_basis import AccessibleSubspace, build_accessible_subspace, global_flip, restrict
from ..thermo import expected_inversion
from .config import Frame, Propagator, RunSettings

log = logging.getLogger(__name__)

# seed-stream tags, so derived generators never collide with the master seed
_ENSEMBLE_STREAM = 1
_DUAL_STREAM = 2


def realization_rng(seed: int, index: int, stream: int = _ENSEMBLE_STREAM) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream, index]))


def _map(func, items, workers: int = 1):
    """Ordered map, optionally over a process pool."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


@dataclass
class ScenarioResult:
    config: ModelConfig
    settings: RunSettings
    trajectory: Trajectory
    summary: dict
    propagator: Propagator
    csv_path: str | None = None
    manifest_path: str | None = None


def _choose_propagator(config: ModelConfig, settings: RunSettings) -> Propagator:
    prop = settings.propagator
    if config.coupling_kind is CouplingKind.GUE:
        if prop not in (Propagator.AUTO, Propagator.SUBSPACE):
            raise UsageError("the GUE interaction is sampled on the accessible subspace only")
        return Propagator.SUBSPACE
    if prop is Propagator.AUTO:
        return Propagator.KRYLOV
    if prop is Propagator.SUBSPACE and config.central_init is CentralInit.SUPERPOSITION:
        raise UsageError("a central superposition needs a full-space propagator")
    return prop


def propagate(op: OperatorMatrix, psi0: PureState, times: np.ndarray, propagator: Propagator,
              krylov_tol: float = 1e-12) -> Trajectory:
    """Trajectory of psi0 under op on a uniform time grid."""
    if propagator is Propagator.KRYLOV:
        dt = times[1] - times[0]
        states = np.array(list(iter_krylov(op, psi0, dt, len(times) - 1, tol=krylov_tol)))
        return make_trajectory(times, states, op.basis, op)
    eig = eigendecompose(op)
    return make_trajectory(times, iter_exact(eig, psi0, times), op.basis, op)


def _summary(config, avg: TimeAverage, diag_z: float) -> dict:
    expected = expected_inversion(config.n_env, config.k)
    return {
        "z_numeric": float(avg.mean[2]),
        "z_numeric_all": float(avg.mean_all[2]),
        "z_stderr": float(avg.stderr[2]),
        "z_diagonal": float(diag_z),
        "z_std": float(avg.std[2]),
        "x_mean": float(avg.mean[0]),
        "y_mean": float(avg.mean[1]),
        "expected_inversion": expected,
        "residual": abs(diag_z - expected),
        "numeric_residual": abs(float(avg.mean[2]) - expected),
    }


def run_scenario(config: ModelConfig, settings: RunSettings | None = None, out_dir=None,
                 assembly: Assembly | None = None) -> ScenarioResult:
    """Propagate the configured initial state and summarize the central spin.

    The long-time z average is reported twice: as a finite-window mean of the
    trajectory and as the diagonal-ensemble limit of the (sector-)projected
    Hamiltonian.
    """
    settings = settings or RunSettings()
    propagator = _choose_propagator(config, settings)
    assembly = assembly or assemble(config)
    times = default_times(config.alpha, settings.n_samples, t_max=settings.resolved_t_max(config.alpha))
    if propagator is Propagator.SUBSPACE:
        op = assembly.projected()
    else:
        op = assembly.h_total
    psi0 = make_initial_state(config, op.basis)
    traj = propagate(op, psi0, times, propagator, settings.krylov_tol)
    if settings.frame is Frame.ROTATING:
        traj = Trajectory(traj.times, to_rotating_frame(traj.bloch, traj.times, config.delta_s),
                          traj.energy, traj.norm)
    avg = numeric_time_average(traj, settings.discard_fraction)
    diag_z = sector_diagonal_average(op, psi0)
    summary = _summary(config, avg, diag_z)
    summary["max_norm_drift"] = traj.max_norm_drift()
    summary["max_energy_drift"] = traj.max_energy_drift()
    result = ScenarioResult(config, settings, traj, summary, propagator)
    if out_dir is not None:
        from .output import write_scenario

        write_scenario(result, out_dir)
    return result


@dataclass
class DetuneScan:
    offsets: np.ndarray  # delta_s - delta_c
    z_avg: np.ndarray
    residual: np.ndarray
    best_index: int
    flat: bool

    @property
    def best_offset(self) -> float:
        return float(self.offsets[self.best_index])

    @property
    def best_z(self) -> float:
        return float(self.z_avg[self.best_index])


def _scan_point(args):
    block, z, shift, amps, basis = args
    eig = EigenSystem(*np.linalg.eigh(block + np.diag(0.5 * shift * z)), basis)
    return diagonal_ensemble_average(eig, PureState(basis, amps))


def detune_scan(config: ModelConfig, window: float = 0.002, steps: int = 21, settings: RunSettings | None = None,
                psi0: PureState | None = None, target: float | None = None,
                assembly: Assembly | None = None) -> DetuneScan:
    """Diagonal-ensemble z average versus delta_s - delta_c in [-window, window].

    Couplings are drawn once; only the central splitting moves.  The best
    point minimizes |z average - target| (default: the band-pair inversion).
    """
    settings = settings or RunSettings()
    if window < 0:
        raise DomainError("window must be >= 0")
    if window == 0:
        offsets = np.zeros(1)
    else:
        if steps < 3:
            raise DomainError("a detuning scan needs at least 3 steps")
        offsets = np.linspace(-window, window, steps)
    base = config.with_(delta_s=config.delta_c)
    assembly = assembly or assemble(base)
    block = assembly.projected()
    sub = block.basis
    if psi0 is None:
        psi0 = make_initial_state(base, sub)
    if target is None:
        target = expected_inversion(config.n_env, config.k)
    # delta_s enters only through (delta_s / 2) sigma_z of the central spin
    z = sub.central_z
    jobs = [(block.toarray(), z, off, psi0.amplitudes, sub) for off in offsets]
    z_avg = np.array(_map(_scan_point, jobs, settings.workers))
    residual = np.abs(z_avg - target)
    flat = bool(np.ptp(residual) <= 1e-12)
    return DetuneScan(offsets, z_avg, residual, int(np.argmin(residual)), flat)


def calibrate_detuning(config: ModelConfig, settings: RunSettings | None = None, **kw) -> tuple[ModelConfig, DetuneScan]:
    """Config with delta_s set to the scan optimum."""
    settings = settings or RunSettings()
    scan = detune_scan(config, settings.detune_window, settings.detune_steps, settings, **kw)
    return config.with_(delta_s=config.delta_c + scan.best_offset), scan


@dataclass
class SweepRow:
    gamma: float
    z_avg: float
    residual: float
    std: float
    delta_s: float


def gamma_sweep(config: ModelConfig, gamma_values, settings: RunSettings | None = None,
                calibrate: bool = False) -> list[SweepRow]:
    """Long-time z average and fluctuation versus ring coupling at fixed star couplings.

    Uses the subspace-projected Hamiltonian.  ``calibrate`` re-optimizes the
    detuning for each gamma.
    """
    settings = settings or RunSettings()
    if config.coupling_kind is CouplingKind.GUE:
        raise UsageError("gamma sweeps need the STAR or RING_STAR model")
    rows = []
    for g in gamma_values:
        if g < 0:
            raise DomainError("gamma values must be >= 0")
        kind = CouplingKind.RING_STAR if config.n_env >= 3 else CouplingKind.STAR
        cfg = config.with_(gamma=float(g), coupling_kind=kind if g > 0 else config.coupling_kind)
        if calibrate:
            cfg, _ = calibrate_detuning(cfg, settings)
        res = run_scenario(cfg, _subspace_settings(settings))
        rows.append(SweepRow(float(g), res.summary["z_diagonal"], res.summary["residual"],
                             res.summary["z_std"], cfg.delta_s))
    return rows


def _subspace_settings(settings: RunSettings) -> RunSettings:
    return replace(settings, propagator=Propagator.SUBSPACE)


@dataclass
class EnsembleResult:
    sample: LambdaZSample
    centers: np.ndarray
    counts: np.ndarray
    realization_means: np.ndarray
    expected_mean: float

    @property
    def stats(self) -> dict:
        return {
            "n_values": int(self.sample.values.size),
            "mean": self.sample.mean,
            "std": self.sample.std,
            "mass_below_-0.95": self.sample.mass_below(-0.95),
            "max_trace_identity_error": float(np.max(np.abs(self.realization_means - self.expected_mean))),
        }


def _realization(args):
    config, index = args
    try:
        assembly = assemble(config, realization_rng(config.seed, index))
        lam = eigenstate_lambdas(eigendecompose(assembly.projected()))
        return lam.values
    except Exception as exc:
        raise SpinBathError(f"realization {index} failed: {exc}") from exc


def ensemble_histogram(config: ModelConfig, n_realizations: int, settings: RunSettings | None = None) -> EnsembleResult:
    """lambda_z of every accessible-subspace eigenstate over independent realizations."""
    settings = settings or RunSettings()
    if n_realizations < 1:
        raise DomainError("need at least one realization")
    chunks = _map(_realization, [(config, i) for i in range(n_realizations)], settings.workers)
    values = np.concatenate(chunks)
    centers, counts = histogram(values, settings.bin_width)
    sample = LambdaZSample(values, {"coupling_kind": config.coupling_kind.value, "gamma": config.gamma,
                                    "seed": config.seed, "n_realizations": n_realizations})
    sub = build_accessible_subspace(config.n_env, config.k)
    expected = (sub.n_upper - sub.n_lower) / sub.dim
    return EnsembleResult(sample, centers, counts, np.array([c.mean() for c in chunks]), expected)


@dataclass
class DualityResult:
    original: ScenarioResult
    dual: ScenarioResult
    mode: str

    @property
    def max_pointwise_sum(self) -> float:
        return float(np.max(np.abs(self.original.trajectory.sz + self.dual.trajectory.sz)))


def dual_initial_state(config: ModelConfig, basis) -> PureState:
    """Global spin flip of the configured initial state, expressed in ``basis``."""
    full = make_initial_state(config, build_accessible_subspace(config.n_env, config.k).full)
    flipped = full.amplitudes[global_flip(config.n_env)]
    if isinstance(basis, AccessibleSubspace):
        part, residual = restrict(flipped, basis)
        if residual > 1e-12:
            raise UsageError("flipped state leaves the dual subspace")
        return PureState(basis, part)
    return PureState(basis, flipped)


def duality_run(config: ModelConfig, settings: RunSettings | None = None, mode: str = "exact",
                calibrate: bool = False) -> DualityResult:
    """Original scenario plus its global-spin-flip dual.

    ``exact``: the dual Hamiltonian is U H U^dagger with U = sigma_x on every
    spin, so <sigma_z> must flip sign pointwise.  ``physical``: same model
    family at band N-1-k with freshly drawn couplings; only the long-time
    inversion is expected to flip.
    """
    settings = settings or RunSettings()
    if config.coupling_kind is CouplingKind.GUE:
        raise UsageError("duality runs need the STAR or RING_STAR model")
    if config.central_init is not CentralInit.UP:
        raise UsageError("duality runs start from the central spin up")
    propagator = _choose_propagator(config, settings)
    n, k = config.n_env, config.k
    times = default_times(config.alpha, settings.n_samples, t_max=settings.resolved_t_max(config.alpha))
    dual_sub = build_accessible_subspace(n, n - 1 - k)

    if mode == "exact":
        if calibrate:
            config, _ = calibrate_detuning(config, settings)
        assembly = assemble(config)
        original = run_scenario(config, settings, assembly=assembly)
        h_dual = conjugate_by_global_flip(assembly.h_total)
        if propagator is Propagator.SUBSPACE:
            h_dual = project(h_dual, dual_sub)
        dual_cfg = config.with_(k=n - 1 - k)
        target = -expected_inversion(n, k)
    elif mode == "physical":
        dual_cfg = config.with_(k=n - 1 - k, seed=int(realization_rng(config.seed, 0, _DUAL_STREAM).integers(2**31)))
        if calibrate:
            config, _ = calibrate_detuning(config, settings)
        original = run_scenario(config, settings)
        target = expected_inversion(n, n - 1 - k)
        probe = dual_initial_state(config, dual_sub)
        if calibrate:
            dual_cfg, _ = calibrate_detuning(dual_cfg, settings, psi0=probe, target=target)
        assembly = assemble(dual_cfg)
        h_dual = assembly.projected() if propagator is Propagator.SUBSPACE else assembly.h_total
    else:
        raise UsageError(f"unknown duality mode {mode!r}")

    psi_dual = dual_initial_state(config, h_dual.basis)
    traj = propagate(h_dual, psi_dual, times, propagator, settings.krylov_tol)
    avg = numeric_time_average(traj, settings.discard_fraction)
    summary = _summary(dual_cfg, avg, sector_diagonal_average(h_dual, psi_dual))
    summary["max_norm_drift"] = traj.max_norm_drift()
    summary["max_energy_drift"] = traj.max_energy_drift()
    summary["target_inversion"] = target
    dual = ScenarioResult(dual_cfg, settings, traj, summary, propagator)
    return DualityResult(original, dual, mode)


def thermo_rows(n_env: int):
    from ..thermo import beta_table

    return [(p.k, p.beta, p.inversion) for p in beta_table(n_env)]
