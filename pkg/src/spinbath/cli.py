"""Command-line entry point.

Subcommands::

    spinbath evolve        --config run.cfg --out-dir out/
    spinbath scan-detune   --window 0.002 --steps 21
    spinbath sweep-gamma   --gammas 0,0.5,1,1.5,2,2.5,3
    spinbath ensemble      --realizations 20
    spinbath duality       --mode exact
    spinbath thermo-table  --n-env 50

Exit codes: 0 success, 2 configuration error, 3 propagation error,
4 output error, 1 anything else from this package.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, OutputError, PropagationError, SpinBathError, UsageError
from .experiments import config as cfgmod
from .experiments import output, scenarios

log = logging.getLogger("spinbath")

EXIT_OTHER, EXIT_CONFIG, EXIT_PROPAGATION, EXIT_IO = 1, 2, 3, 4


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value file with model and run settings")
    p.add_argument("--seed", type=int, help="master seed (overrides the config file)")
    p.add_argument("--out-dir", type=Path, default=Path("."), help="directory for CSV and manifest files")
    p.add_argument("--tmax", type=float, help="propagation time in units of 1/delta_c")
    p.add_argument("--samples", type=int, help="number of time samples")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key; may be repeated")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinbath", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="propagate one scenario and write its trajectory")
    _common(p)
    p.add_argument("--calibrate", action="store_true", help="set delta_s by a detuning scan first")

    p = sub.add_parser("scan-detune", help="long-time inversion versus delta_s - delta_c")
    _common(p)
    p.add_argument("--window", type=float)
    p.add_argument("--steps", type=int)

    p = sub.add_parser("sweep-gamma", help="long-time inversion versus ring coupling")
    _common(p)
    p.add_argument("--gammas", default="0,0.5,1,1.5,2,2.5,3", help="comma-separated, in units of alpha")
    p.add_argument("--calibrate", action="store_true")

    p = sub.add_parser("ensemble", help="eigenstate lambda_z histogram over realizations")
    _common(p)
    p.add_argument("--realizations", type=int, default=100)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("duality", help="original and global-spin-flip dual runs")
    _common(p)
    p.add_argument("--mode", choices=("exact", "physical"), default="exact")
    p.add_argument("--calibrate", action="store_true")

    p = sub.add_parser("thermo-table", help="spectral temperature and inversion for every band")
    _common(p)
    p.add_argument("--n-env", type=int, help="defaults to n_env of the config")
    return parser


def _load(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    for flag, key in (("seed", "seed"), ("tmax", "t_max"), ("samples", "n_samples"),
                      ("window", "detune_window"), ("steps", "detune_steps"), ("workers", "workers")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = str(value)
    return cfgmod.load_config(args.config, overrides)


def _evolve(args, model, run):
    if args.calibrate:
        model, _ = scenarios.calibrate_detuning(model, run)
    res = scenarios.run_scenario(model, run, args.out_dir)
    for key, value in res.summary.items():
        print(f"{key} = {value!r}")


def _scan(args, model, run):
    scan = scenarios.detune_scan(model, run.detune_window, run.detune_steps, run)
    output.write_csv(args.out_dir / "scan.csv", "param,z_avg,residual", [scan.offsets, scan.z_avg, scan.residual])
    output.write_manifest(args.out_dir / "scan.manifest.txt", model, run,
                          {"best_offset": scan.best_offset, "best_z_avg": scan.best_z, "flat": scan.flat})
    print(f"best delta_s - delta_c = {scan.best_offset!r}  z_avg = {scan.best_z!r}  flat = {scan.flat}")


def _sweep(args, model, run):
    try:
        gammas = [float(g) for g in args.gammas.split(",") if g.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --gammas: {args.gammas!r}") from exc
    rows = scenarios.gamma_sweep(model, gammas, run, calibrate=args.calibrate)
    cols = np.array([(r.gamma, r.z_avg, r.residual, r.std) for r in rows]).T
    output.write_csv(args.out_dir / "sweep.csv", "param,z_avg,residual,std", cols)
    output.write_manifest(args.out_dir / "sweep.manifest.txt", model, run,
                          {"calibrated_delta_s": ",".join(repr(r.delta_s) for r in rows)})
    for r in rows:
        print(f"gamma = {r.gamma:g}  z_avg = {r.z_avg:.6f}  std = {r.std:.6f}")


def _ensemble(args, model, run):
    res = scenarios.ensemble_histogram(model, args.realizations, run)
    output.write_csv(args.out_dir / "histogram.csv", "bin_center,count", [res.centers, res.counts])
    output.write_manifest(args.out_dir / "histogram.manifest.txt", model, run,
                          {"n_realizations": args.realizations, **res.stats})
    for key, value in res.stats.items():
        print(f"{key} = {value!r}")


def _duality(args, model, run):
    res = scenarios.duality_run(model, run, args.mode, calibrate=args.calibrate)
    output.write_scenario(res.original, args.out_dir, "original")
    output.write_scenario(res.dual, args.out_dir, "dual")
    t = res.original.trajectory.times
    output.write_csv(args.out_dir / "duality_sum.csv", "t,sz_sum",
                     [t, res.original.trajectory.sz + res.dual.trajectory.sz])
    print(f"original z_avg = {res.original.summary['z_diagonal']!r}")
    print(f"dual z_avg = {res.dual.summary['z_diagonal']!r}")
    print(f"max |sz + sz_dual| = {res.max_pointwise_sum!r}")


def _thermo(args, model, run):
    n = args.n_env if args.n_env is not None else model.n_env
    if n < 2:
        raise DomainError("thermo-table needs N >= 2")
    rows = np.array(scenarios.thermo_rows(n), dtype=float).T
    output.write_csv(args.out_dir / "thermo.csv", "k,beta,inversion", rows)
    print(f"wrote {n} rows to {args.out_dir / 'thermo.csv'}")


COMMANDS = {
    "evolve": _evolve,
    "scan-detune": _scan,
    "sweep-gamma": _sweep,
    "ensemble": _ensemble,
    "duality": _duality,
    "thermo-table": _thermo,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        model, run = _load(args)
        COMMANDS[args.command](args, model, run)
    except (ConfigError, DomainError, UsageError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PropagationError as exc:
        print(f"propagation error: {exc}", file=sys.stderr)
        return EXIT_PROPAGATION
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SpinBathError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    return 0


if __name__ == "__main__":
    sys.exit(main())
