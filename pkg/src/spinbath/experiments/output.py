"""CSV and manifest writers.  Numbers are written with 17 significant digits."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from ..errors import OutputError
from .config import dump_config

FMT = "%.17g"


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(path, exc) from exc
    return path


def csv_text(header: str, columns) -> str:
    table = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    buf = io.StringIO()
    np.savetxt(buf, table, fmt=FMT, delimiter=",", header=header, comments="")
    return buf.getvalue()


def write_csv(path, header: str, columns) -> Path:
    return _write(Path(path), csv_text(header, columns))


def write_manifest(path, model, run=None, extra: dict | None = None) -> Path:
    text = dump_config(model, run)
    for key, value in (extra or {}).items():
        text += f"{key} = {value!r}\n" if isinstance(value, float) else f"{key} = {value}\n"
    return _write(Path(path), text)


def write_trajectory(path, traj) -> Path:
    b = traj.bloch
    return write_csv(path, "t,sx,sy,sz,energy,norm",
                     [traj.times, b[:, 0], b[:, 1], b[:, 2], traj.energy, traj.norm])


def write_scenario(result, out_dir, stem: str = "trajectory") -> None:
    out = Path(out_dir)
    result.csv_path = str(write_trajectory(out / f"{stem}.csv", result.trajectory))
    extra = {"propagator_used": result.propagator.value, **result.summary}
    result.manifest_path = str(write_manifest(out / f"{stem}.manifest.txt", result.config, result.settings, extra))
