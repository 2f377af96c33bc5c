"""Flat ``key = value`` configuration files.

Keys mirror the fields of :class:`ModelConfig` and :class:`RunSettings`.
Blank lines and ``#`` comments are ignored.  Example::

    n_env = 14
    k = 2
    coupling_kind = RING_STAR
    gamma = 3
    alpha = 0.0002
    seed = 7
    propagator = subspace
"""

from __future__ import annotations

import dataclasses
import enum
import typing
from dataclasses import dataclass, fields
from pathlib import Path

from ..errors import ConfigError
from ..evolution import DEFAULT_ALPHA_TMAX, DEFAULT_SAMPLES
from ..hamiltonian import ModelConfig


class Propagator(str, enum.Enum):
    AUTO = "auto"
    SUBSPACE = "subspace"
    KRYLOV = "krylov"
    EXACT = "exact"


class Frame(str, enum.Enum):
    LAB = "lab"
    ROTATING = "rotating"


@dataclass(frozen=True)
class RunSettings:
    """Numerical controls shared by all scenario runners.

    ``t_max`` of None means ``alpha_tmax / alpha``.  ``propagator`` AUTO picks
    the subspace path for GUE and full-space Krylov otherwise.
    ``krylov_tol`` is per step; errors add up over the thousands of steps of
    a trajectory, hence a tighter default than a single propagation needs.
    """

    t_max: float | None = None
    alpha_tmax: float = DEFAULT_ALPHA_TMAX
    n_samples: int = DEFAULT_SAMPLES
    discard_fraction: float = 0.1
    propagator: Propagator = Propagator.AUTO
    krylov_tol: float = 1e-12
    frame: Frame = Frame.LAB
    detune_window: float = 0.002
    detune_steps: int = 21
    bin_width: float = 0.02
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "propagator", Propagator(self.propagator))
        object.__setattr__(self, "frame", Frame(self.frame))
        if self.n_samples < 2:
            raise ConfigError("n_samples must be >= 2")
        if self.t_max is not None and self.t_max <= 0:
            raise ConfigError("t_max must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def resolved_t_max(self, alpha: float) -> float:
        return self.t_max if self.t_max is not None else self.alpha_tmax / alpha


_MODEL_FIELDS = {f.name: f for f in fields(ModelConfig)}
_RUN_FIELDS = {f.name: f for f in fields(RunSettings)}


def _coerce(name: str, raw: str, hint):
    hint_s = str(hint)
    try:
        if "None" in hint_s and raw.lower() in ("none", ""):
            return None
        if "int" in hint_s and "float" not in hint_s:
            return int(raw)
        if "float" in hint_s:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_pairs(pairs: dict[str, str]) -> tuple[ModelConfig, RunSettings]:
    model_kw, run_kw = {}, {}
    model_hints = typing.get_type_hints(ModelConfig)
    run_hints = typing.get_type_hints(RunSettings)
    for key, raw in pairs.items():
        if key in _MODEL_FIELDS:
            model_kw[key] = _coerce(key, raw, model_hints[key])
        elif key in _RUN_FIELDS:
            run_kw[key] = _coerce(key, raw, run_hints[key])
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        return ModelConfig(**model_kw), RunSettings(**run_kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def read_pairs(path: str | Path) -> dict[str, str]:
    pairs = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in pairs:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None):
    pairs = read_pairs(path) if path else {}
    pairs.update(overrides or {})
    return parse_pairs(pairs)


def _fmt(value) -> str:
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(model: ModelConfig, run: RunSettings | None = None) -> str:
    lines = [f"{k} = {_fmt(v)}" for k, v in dataclasses.asdict(model).items()]
    if run is not None:
        lines += [f"{k} = {_fmt(v)}" for k, v in dataclasses.asdict(run).items()]
    return "\n".join(lines) + "\n"
