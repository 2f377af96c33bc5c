"""Scenario layer: configuration, runners and file output."""

from .config import Frame, Propagator, RunSettings, dump_config, load_config
from .scenarios import (
    DetuneScan,
    DualityResult,
    EnsembleResult,
    ScenarioResult,
    SweepRow,
    calibrate_detuning,
    detune_scan,
    duality_run,
    ensemble_histogram,
    gamma_sweep,
    realization_rng,
    run_scenario,
    thermo_rows,
)

__all__ = [
    "DetuneScan",
    "DualityResult",
    "EnsembleResult",
    "Frame",
    "Propagator",
    "RunSettings",
    "ScenarioResult",
    "SweepRow",
    "calibrate_detuning",
    "detune_scan",
    "dump_config",
    "duality_run",
    "ensemble_histogram",
    "gamma_sweep",
    "load_config",
    "realization_rng",
    "run_scenario",
    "thermo_rows",
]
