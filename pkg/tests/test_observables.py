import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinbath.errors import UsageError
from spinbath.evolution import EigenSystem, PureState, Trajectory, eigendecompose, make_initial_state, propagate_exact
from spinbath.hamiltonian import ModelConfig, OperatorMatrix, assemble, project, zeeman_hamiltonian
from spinbath.observables import (
    ReducedSpinState,
    bloch_vectors,
    diagonal_ensemble_average,
    eigenstate_lambdas,
    histogram,
    make_trajectory,
    numeric_time_average,
    reduce_central,
    sector_diagonal_average,
    to_rotating_frame,
)
from spinbath.spin_basis import FullSpace, build_accessible_subspace, embed


def random_full_state(n_env, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(2 << n_env) + 1j * rng.standard_normal(2 << n_env)
    return PureState(FullSpace(n_env), v / np.linalg.norm(v))


def test_product_state_reduces_to_pure_up():
    chi = np.random.default_rng(0).standard_normal(8) + 0j
    chi /= np.linalg.norm(chi)
    amps = np.zeros(16, dtype=complex)
    amps[1::2] = chi  # central bit 1 on every environment pattern
    state = reduce_central(PureState(FullSpace(3), amps))
    np.testing.assert_allclose(state.rho, [[1, 0], [0, 0]], atol=1e-15)
    np.testing.assert_allclose(state.bloch, [0, 0, 1], atol=1e-15)


def test_bell_like_state_is_maximally_mixed():
    amps = np.zeros(8, dtype=complex)
    amps[(0b01 << 1) | 1] = amps[(0b10 << 1) | 0] = 1 / np.sqrt(2)
    state = reduce_central(PureState(FullSpace(2), amps))
    np.testing.assert_allclose(state.rho, np.eye(2) / 2, atol=1e-15)
    np.testing.assert_allclose(state.bloch, 0, atol=1e-15)


def test_sigma_y_eigenstate_bloch():
    amps = np.zeros(4, dtype=complex)
    amps[0] = 1 / np.sqrt(2)
    amps[1] = 1j / np.sqrt(2)
    b = bloch_vectors(amps, FullSpace(1))[0]
    rho = reduce_central(PureState(FullSpace(1), amps))
    np.testing.assert_allclose(b, rho.bloch, atol=1e-15)
    # (|down> + i|up>)/sqrt2 is proportional to (|up> - i|down>)/sqrt2, the -y eigenstate
    np.testing.assert_allclose(b, [0, -1, 0], atol=1e-15)


def test_subspace_states_have_no_coherence():
    sub = build_accessible_subspace(6, 2)
    rng = np.random.default_rng(2)
    v = rng.standard_normal(sub.dim) + 1j * rng.standard_normal(sub.dim)
    v /= np.linalg.norm(v)
    state = reduce_central(PureState(sub, v))
    assert state.rho[0, 1] == 0 and state.rho[1, 0] == 0
    full = reduce_central(PureState(sub.full, embed(v, sub)))
    np.testing.assert_allclose(full.rho, state.rho, atol=1e-14)


def test_reduce_rejects_unnormalized():
    with pytest.raises(UsageError):
        reduce_central(PureState(FullSpace(1), np.array([1.0, 1.0, 0, 0])))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_reduced_state_invariants(seed, n):
    psi = random_full_state(n, seed)
    state = reduce_central(psi)
    assert state.is_physical()
    np.testing.assert_allclose(bloch_vectors(psi.amplitudes, psi.basis)[0], state.bloch, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 1.0))
def test_partial_trace_is_linear_in_the_density_matrix(seed, p):
    a, b = random_full_state(3, seed), random_full_state(3, seed + 1)
    mixed = p * reduce_central(a).rho + (1 - p) * reduce_central(b).rho
    # rebuild through the joint density operator
    rho = p * np.outer(a.amplitudes, a.amplitudes.conj()) + (1 - p) * np.outer(b.amplitudes, b.amplitudes.conj())
    r = rho.reshape(8, 2, 8, 2)
    direct = np.einsum("asat->st", r)[::-1, ::-1]  # (down, up) -> (up, down)
    np.testing.assert_allclose(mixed, direct, atol=1e-12)
    assert abs(np.trace(mixed) - 1) < 1e-12


def test_reduced_state_physicality_flags():
    assert not ReducedSpinState(np.array([[1.2, 0], [0, -0.2]], dtype=complex)).is_physical()
    assert not ReducedSpinState(np.array([[0.5, 0.1], [0.2, 0.5]], dtype=complex)).is_physical()


def test_numeric_average_constant_and_cosine():
    t = np.linspace(0, 100, 2001)
    const = Trajectory(t, np.tile([0.1, -0.2, 0.3], (len(t), 1)), np.ones_like(t), np.ones_like(t))
    avg = numeric_time_average(const)
    np.testing.assert_allclose(avg.mean, [0.1, -0.2, 0.3])
    np.testing.assert_allclose(avg.std, 0, atol=1e-14)
    np.testing.assert_allclose(avg.mean_all, [0.1, -0.2, 0.3])
    omega = 2 * np.pi / 10
    b = np.zeros((len(t), 3))
    b[:, 2] = np.cos(omega * t)
    avg = numeric_time_average(Trajectory(t, b, np.ones_like(t), np.ones_like(t)), discard_fraction=0.0)
    assert abs(avg.mean[2]) < 1e-3
    assert avg.std[2] == pytest.approx(1 / np.sqrt(2), rel=1e-3)


def test_numeric_average_needs_samples():
    t = np.linspace(0, 1, 50)
    traj = Trajectory(t, np.zeros((50, 3)), np.ones(50), np.ones(50))
    with pytest.raises(UsageError):
        numeric_time_average(traj)
    with pytest.raises(UsageError):
        numeric_time_average(traj, discard_fraction=1.0)


def test_rotating_frame_removes_precession():
    t = np.linspace(0, 50, 501)
    b = np.stack([np.cos(1.3 * t), np.sin(1.3 * t), np.zeros_like(t)], axis=1)
    rot = to_rotating_frame(b, t, 1.3)
    np.testing.assert_allclose(rot[:, 0], 1.0, atol=1e-12)
    np.testing.assert_allclose(rot[:, 1], 0.0, atol=1e-12)


def test_free_precession_direction_matches_frame():
    # H = (delta_s/2) sigma_z on the central spin: <sigma_x + i sigma_y> ~ exp(+i delta_s t)
    cfg = ModelConfig(n_env=3, k=1, delta_s=1.05, central_init="SUPERPOSITION", coupling_kind="STAR")
    h = zeeman_hamiltonian(cfg)
    psi = make_initial_state(cfg, h.basis)
    t = np.linspace(0, 20, 200)
    traj = make_trajectory(t, propagate_exact(eigendecompose(h), psi, t), h.basis, h)
    rot = to_rotating_frame(traj.bloch, t, cfg.delta_s)
    np.testing.assert_allclose(rot[:, 0], 1.0, atol=1e-12)
    np.testing.assert_allclose(rot[:, 1], 0.0, atol=1e-12)


def test_diagonal_ensemble_of_eigenstate_is_its_lambda():
    asm = assemble(ModelConfig(n_env=6, k=2, coupling_kind="GUE", seed=1))
    eig = eigendecompose(asm.h_total)
    lam = eigenstate_lambdas(eig).values
    for n in (0, 17, 34):
        psi = PureState(eig.basis, eig.eigenvectors[:, n])
        assert diagonal_ensemble_average(eig, psi) == pytest.approx(lam[n], abs=1e-12)


def test_diagonal_ensemble_agrees_with_long_numeric_average():
    cfg = ModelConfig(n_env=8, k=2, coupling_kind="GUE", seed=4)
    h = assemble(cfg).h_total
    eig = eigendecompose(h)
    psi = make_initial_state(cfg, h.basis)
    t = np.linspace(0, 3000 / cfg.alpha, 20000)
    traj = make_trajectory(t, propagate_exact(eig, psi, t), h.basis, h)
    avg = numeric_time_average(traj)
    de = diagonal_ensemble_average(eig, psi)
    assert abs(avg.mean[2] - de) <= 3 * avg.stderr[2]


def test_degenerate_spectrum_uses_sigma_z_adapted_basis():
    # Zeeman-only at resonance: the whole subspace is one degenerate level
    cfg = ModelConfig(n_env=5, k=1)
    sub = build_accessible_subspace(5, 1)
    h = project(zeeman_hamiltonian(cfg), sub)
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.standard_normal((sub.dim, sub.dim)) + 1j * rng.standard_normal((sub.dim, sub.dim)))
    # hand over a deliberately scrambled eigenbasis of the degenerate level
    eig = EigenSystem(np.full(sub.dim, h.toarray()[0, 0].real), q, sub)
    lam = eigenstate_lambdas(eig).values
    assert sorted(np.round(lam, 12)) == [-1.0] * 10 + [1.0] * 5
    psi = make_initial_state(cfg, sub)
    assert diagonal_ensemble_average(eig, psi) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("kind", ["GUE", "STAR", "RING_STAR"])
def test_trace_identity(kind):
    cfg = ModelConfig(n_env=7, k=2, coupling_kind=kind, gamma=3.0, seed=2)
    lam = eigenstate_lambdas(eigendecompose(assemble(cfg).projected()))
    assert len(lam.values) == 21 + 35
    assert lam.mean == pytest.approx((21 - 35) / 56, abs=1e-9)
    assert np.all(np.abs(lam.values) <= 1.0)


def test_sector_average_matches_subspace_path():
    cfg = ModelConfig(n_env=6, k=2, coupling_kind="STAR", seed=3)
    asm = assemble(cfg)
    full_psi = make_initial_state(cfg, asm.h_total.basis)
    sub_psi = make_initial_state(cfg, asm.subspace)
    a = sector_diagonal_average(asm.h_total, full_psi)
    b = diagonal_ensemble_average(eigendecompose(asm.projected()), sub_psi)
    assert a == pytest.approx(b, abs=1e-13)


def test_sector_average_superposition_and_edges():
    cfg = ModelConfig(n_env=4, k=1, coupling_kind="STAR", seed=1)
    asm = assemble(cfg)
    amps = np.zeros(32, dtype=complex)
    amps[0] = amps[31] = 1 / np.sqrt(2)  # all down and all up
    assert sector_diagonal_average(asm.h_total, PureState(FullSpace(4), amps)) == pytest.approx(0.0, abs=1e-15)


def test_histogram_contract():
    centers, counts = histogram([0.013])
    assert len(centers) == 100 and counts.sum() == 1 and np.count_nonzero(counts) == 1
    assert centers[np.argmax(counts)] == pytest.approx(0.01)
    grid = -1 + 0.02 * np.arange(100) + 0.01
    _, counts = histogram(np.repeat(grid, 3))
    assert np.all(counts == 3)
    _, counts = histogram([-1.0, 1.0, 1.5, -2.0])
    assert counts[0] == 2 and counts[-1] == 2
    _, counts = histogram([])
    assert counts.sum() == 0 and len(counts) == 100
    # half-open bins: the left edge belongs to its bin
    _, counts = histogram([-0.98])
    assert counts[1] == 1
    with pytest.raises(UsageError):
        histogram([0.0], bin_width=0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), max_size=300))
def test_histogram_partitions(values):
    _, counts = histogram(values)
    assert counts.sum() == len(values)


def test_make_trajectory_from_chunks_matches_array():
    h = OperatorMatrix(FullSpace(1), np.diag([0.0, 1.0, 2.0, 3.0]).astype(complex))
    psi = PureState(FullSpace(1), np.full(4, 0.5, dtype=complex))
    eig = eigendecompose(h)
    t = np.linspace(0, 3, 10)
    states = propagate_exact(eig, psi, t)
    a = make_trajectory(t, states, h.basis, h)
    b = make_trajectory(t, [(t[:4], states[:4]), (t[4:], states[4:])], h.basis, h)
    np.testing.assert_array_equal(a.bloch, b.bloch)
    np.testing.assert_allclose(a.energy, 1.5)
