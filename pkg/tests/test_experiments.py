import math

import numpy as np
import pytest

from spinbath.errors import ConfigError, DomainError, OutputError, SpinBathError, UsageError
from spinbath.experiments import (
    Propagator,
    RunSettings,
    calibrate_detuning,
    detune_scan,
    dump_config,
    duality_run,
    ensemble_histogram,
    gamma_sweep,
    load_config,
    run_scenario,
    thermo_rows,
)
from spinbath.experiments import scenarios
from spinbath.experiments.config import parse_pairs, read_pairs
from spinbath.experiments.output import write_csv
from spinbath.hamiltonian import CouplingKind, ModelConfig
from spinbath.thermo import expected_inversion

FAST = RunSettings(n_samples=400, propagator="subspace")


def small(kind="STAR", **kw):
    base = dict(n_env=7, k=2, coupling_kind=kind, seed=3)
    base.update(kw)
    return ModelConfig(**base)


def test_run_scenario_summary_and_files(tmp_path):
    res = run_scenario(small("GUE"), FAST, tmp_path)
    s = res.summary
    assert all(math.isfinite(v) for v in s.values())
    assert s["expected_inversion"] == expected_inversion(7, 2)
    assert s["residual"] == pytest.approx(abs(s["z_diagonal"] - s["expected_inversion"]))
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,sx,sy,sz,energy,norm"
    assert len(lines) == 401
    assert lines[1].split(",")[3] == "1"
    manifest = (tmp_path / "trajectory.manifest.txt").read_text()
    assert "seed = 3" in manifest and "propagator_used = subspace" in manifest
    assert res.propagator is Propagator.SUBSPACE


def test_csv_is_byte_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_scenario(small("RING_STAR", gamma=2.0), FAST, a)
    run_scenario(small("RING_STAR", gamma=2.0), FAST, b)
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    run_scenario(small("RING_STAR", gamma=2.0, seed=4), FAST, b)
    assert (a / "trajectory.csv").read_bytes() != (b / "trajectory.csv").read_bytes()


def test_csv_round_trip_precision(tmp_path):
    x = np.array([1 / 3, np.pi * 1e-17, -2.5e300])
    path = write_csv(tmp_path / "x.csv", "a", [x])
    back = np.loadtxt(path, skiprows=1)
    np.testing.assert_array_equal(back, x)


def test_output_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OutputError) as info:
        write_csv(blocker / "sub" / "x.csv", "a", [[1.0]])
    assert str(blocker) in str(info.value)


def test_propagator_choice():
    assert run_scenario(small("GUE"), RunSettings(n_samples=200)).propagator is Propagator.SUBSPACE
    with pytest.raises(UsageError):
        run_scenario(small("GUE"), RunSettings(n_samples=200, propagator="krylov"))
    res = run_scenario(small("STAR", n_env=5, k=1), RunSettings(n_samples=120, alpha_tmax=2.0))
    assert res.propagator is Propagator.KRYLOV
    assert res.trajectory.conserves()
    with pytest.raises(UsageError):
        run_scenario(small("STAR", central_init="SUPERPOSITION"), FAST)


def test_krylov_and_exact_full_space_scenarios_agree():
    cfg = small("RING_STAR", n_env=5, k=1, gamma=3.0)
    settings = RunSettings(n_samples=150, alpha_tmax=3.0)
    a = run_scenario(cfg, settings)
    b = run_scenario(cfg, RunSettings(n_samples=150, alpha_tmax=3.0, propagator="exact"))
    assert np.abs(a.trajectory.bloch - b.trajectory.bloch).max() <= 1e-8
    assert a.summary["z_diagonal"] == b.summary["z_diagonal"]


def test_rotating_frame_option():
    cfg = small("RING_STAR", n_env=5, k=1, gamma=3.0, central_init="SUPERPOSITION")
    lab = run_scenario(cfg, RunSettings(n_samples=200, alpha_tmax=2.0, propagator="exact"))
    rot = run_scenario(cfg, RunSettings(n_samples=200, alpha_tmax=2.0, propagator="exact", frame="rotating"))
    np.testing.assert_allclose(np.hypot(lab.trajectory.bloch[:, 0], lab.trajectory.bloch[:, 1]),
                               np.hypot(rot.trajectory.bloch[:, 0], rot.trajectory.bloch[:, 1]), atol=1e-12)
    assert rot.trajectory.bloch[0, 0] == pytest.approx(1.0)


def test_detune_scan_zero_window():
    scan = detune_scan(small("STAR"), window=0.0)
    assert len(scan.offsets) == 1 and scan.best_index == 0 and scan.flat


def test_detune_scan_validation():
    with pytest.raises(DomainError):
        detune_scan(small(), window=0.001, steps=2)
    with pytest.raises(DomainError):
        detune_scan(small(), window=-0.001)


def test_detune_scan_star_is_not_flat_and_gue_varies_less():
    star = [detune_scan(small("STAR", n_env=10, seed=s)) for s in range(3)]
    gue = [detune_scan(small("GUE", n_env=10, seed=s)) for s in range(3)]
    assert all(not s.flat for s in star)
    assert max(np.ptp(g.z_avg) for g in gue) < min(np.ptp(s.z_avg) for s in star)
    for s in star:
        assert s.residual[s.best_index] == s.residual.min()
        np.testing.assert_allclose(s.offsets, np.linspace(-0.002, 0.002, 21))


def test_detune_scan_point_matches_direct_run():
    cfg = small("STAR", n_env=8)
    scan = detune_scan(cfg)
    i = 4
    direct = run_scenario(cfg.with_(delta_s=1.0 + scan.offsets[i]), FAST).summary["z_diagonal"]
    assert scan.z_avg[i] == pytest.approx(direct, abs=1e-10)


def test_calibrate_detuning_sets_delta_s():
    cfg = small("STAR", n_env=8)
    tuned, scan = calibrate_detuning(cfg)
    assert tuned.delta_s == pytest.approx(1.0 + scan.best_offset)


def test_gamma_zero_reproduces_star_summary():
    cfg = small("STAR", n_env=8, seed=5)
    rows = gamma_sweep(cfg, [0.0, 3.0], FAST)
    star = run_scenario(cfg, FAST).summary
    assert rows[0].z_avg == star["z_diagonal"]
    assert rows[0].std == star["z_std"]
    assert rows[1].gamma == 3.0
    with pytest.raises(DomainError):
        gamma_sweep(cfg, [-1.0], FAST)
    with pytest.raises(UsageError):
        gamma_sweep(small("GUE"), [0.0], FAST)


def test_ensemble_histogram_contract():
    res = ensemble_histogram(small("STAR", n_env=6), 4)
    assert res.sample.values.size == 4 * (15 + 20)
    assert res.counts.sum() == res.sample.values.size
    assert res.stats["max_trace_identity_error"] <= 1e-9
    assert res.sample.metadata["n_realizations"] == 4
    with pytest.raises(DomainError):
        ensemble_histogram(small(), 0)


def test_ensemble_realizations_use_fresh_streams():
    res = ensemble_histogram(small("GUE", n_env=6), 3)
    chunks = res.sample.values.reshape(3, -1)
    assert not np.allclose(chunks[0], chunks[1])
    again = ensemble_histogram(small("GUE", n_env=6), 3)
    np.testing.assert_array_equal(res.sample.values, again.sample.values)


def test_ensemble_parallel_matches_serial():
    cfg = small("RING_STAR", n_env=6, gamma=3.0)
    serial = ensemble_histogram(cfg, 4)
    parallel = ensemble_histogram(cfg, 4, RunSettings(workers=2))
    np.testing.assert_array_equal(serial.sample.values, parallel.sample.values)


def test_ensemble_failure_reports_index(monkeypatch):
    calls = {"n": 0}
    real = scenarios.eigendecompose

    def flaky(op, *a, **kw):
        calls["n"] += 1
        if calls["n"] == 3:
            raise RuntimeError("boom")
        return real(op, *a, **kw)

    monkeypatch.setattr(scenarios, "eigendecompose", flaky)
    with pytest.raises(SpinBathError, match="realization 2"):
        ensemble_histogram(small("GUE", n_env=5), 5)


def test_duality_exact_subspace_and_full():
    cfg = small("RING_STAR", n_env=6, gamma=3.0, delta_s=1.001)
    res = duality_run(cfg, FAST, "exact")
    assert res.max_pointwise_sum <= 1e-10
    assert res.dual.config.k == 6 - 1 - 2
    full = duality_run(cfg.with_(n_env=5, k=1), RunSettings(n_samples=150, alpha_tmax=2.0), "exact")
    assert full.max_pointwise_sum <= 1e-10


def test_duality_physical_flips_thermo_prediction():
    res = duality_run(small("RING_STAR", n_env=8, gamma=3.0), FAST, "physical")
    assert res.dual.summary["expected_inversion"] == -res.original.summary["expected_inversion"]
    assert res.dual.trajectory.sz[0] == pytest.approx(-1.0)
    assert res.dual.config.seed != res.original.config.seed


def test_duality_validation():
    with pytest.raises(UsageError):
        duality_run(small("GUE"), FAST)
    with pytest.raises(UsageError):
        duality_run(small("STAR"), FAST, "bogus")


def test_thermo_rows():
    rows = thermo_rows(50)
    assert len(rows) == 50
    assert rows[24][1] > 0 > rows[25][1]
    two = thermo_rows(2)
    assert two[0][1] == pytest.approx(math.log(2)) and two[1][1] == pytest.approx(-math.log(2))
    assert thermo_rows(15)[7][1:] == (0.0, 0.0)


def test_config_file_round_trip(tmp_path):
    model = ModelConfig(n_env=9, k=3, delta_s=1.00082, gamma=1.5, coupling_kind="RING_STAR", seed=12)
    run = RunSettings(n_samples=1000, propagator="exact", t_max=123.5)
    path = tmp_path / "run.cfg"
    path.write_text("# comment\n\n" + dump_config(model, run))
    m2, r2 = load_config(path)
    assert m2 == model and r2 == run
    m3, _ = load_config(path, {"seed": "13"})
    assert m3.seed == 13


@pytest.mark.parametrize("text", ["n_env = x\n", "nonsense\n", "bogus = 1\n", "k = 1\nk = 2\n",
                                  "coupling_kind = NOPE\n", "alpha = -1\n", "n_samples = 1\n"])
def test_config_errors(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_parse_pairs_defaults():
    model, run = parse_pairs({})
    assert model == ModelConfig() and run == RunSettings()
    assert model.coupling_kind is CouplingKind.GUE
    assert read_pairs.__name__ == "read_pairs"
