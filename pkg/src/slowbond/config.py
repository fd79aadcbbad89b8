"""Run configuration: flat ``key = value`` files and command-line overrides.

Every value is parsed and validated before any computation starts.  Unknown
keys are rejected.  Errors are :class:`ConfigError` and name the key and the
violated constraint.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping

import numpy as np

from .profiles import get_profile, in_unit_range

EXPERIMENTS = ("solve", "sweep-alpha", "simulate", "hydro-compare", "green-check", "energy")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(message)
        self.key = key


def default_alpha_grid(lo: float = 1e-3, hi: float = 1e3, per_decade: int = 4) -> tuple[float, ...]:
    decades = round(math.log10(hi / lo))
    exps = np.linspace(math.log10(lo), math.log10(hi), decades * per_decade + 1)
    return tuple(float(10.0 ** e) for e in exps)


@dataclass(frozen=True)
class RunSpec:
    experiment: str = "solve"
    n: int = 256
    alpha: float = 1.0
    alphas: tuple = field(default_factory=default_alpha_grid)
    beta: float = 1.0
    dt: float = 1e-5
    theta: float = 0.5
    T: float = 0.1
    snapshot_stride: int = 100
    profile: str = "halfcos"
    seed: int = 0
    replicas: int = 200
    epsilon: float = 0.05
    times: tuple = (0.05,)
    n_list: tuple = (64, 128, 256)
    betas: tuple = (0.5, 1.0, 2.0, math.inf)
    n_ref: int = 1024
    dt_ref: float = 1e-5
    long_form: bool = False
    output: str | None = None
    workers: int = 1

    def metadata(self) -> dict:
        """Every setting except ``output`` and ``workers``.

        Neither affects results, and leaving them out keeps files written
        with different parallelism byte-identical.
        """
        d = asdict(self)
        d.pop("output")
        d.pop("workers")
        return d


# --- value parsers -----------------------------------------------------------

def _int(key, raw):
    if isinstance(raw, bool):
        raise ConfigError(key, f"{key} must be an integer, got {raw!r}")
    if isinstance(raw, (int, np.integer)):
        return int(raw)
    try:
        return int(str(raw).strip())
    except ValueError:
        raise ConfigError(key, f"{key} must be an integer, got {raw!r}") from None


def _float(key, raw, allow_inf=False):
    if isinstance(raw, bool):
        raise ConfigError(key, f"{key} must be a number, got {raw!r}")
    try:
        val = float(str(raw).strip()) if isinstance(raw, str) else float(raw)
    except (TypeError, ValueError):
        raise ConfigError(key, f"{key} must be a number, got {raw!r}") from None
    if math.isnan(val) or (math.isinf(val) and not (allow_inf and val > 0)):
        raise ConfigError(key, f"{key} must be finite{' or inf' if allow_inf else ''}, got {raw!r}")
    return val


def _list(key, raw, item):
    if isinstance(raw, (list, tuple)):
        parts = list(raw)
    else:
        parts = [p for p in str(raw).split(",") if p.strip()]
    if not parts:
        raise ConfigError(key, f"{key} must be a non-empty list")
    return tuple(item(key, p) for p in parts)


def _alphas(key, raw):
    # "geom:lo:hi:per_decade" or an explicit comma list
    if isinstance(raw, str) and raw.strip().startswith("geom:"):
        bits = raw.strip().split(":")
        if len(bits) != 4:
            raise ConfigError(key, f"{key} geometric form is geom:lo:hi:per_decade, got {raw!r}")
        lo, hi = _float(key, bits[1]), _float(key, bits[2])
        per = _int(key, bits[3])
        if not (0 < lo < hi) or per < 1:
            raise ConfigError(key, f"{key} needs 0 < lo < hi and per_decade >= 1")
        return default_alpha_grid(lo, hi, per)
    return _list(key, raw, _float)


def _bool(key, raw):
    if isinstance(raw, bool):
        return raw
    s = str(raw).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"{key} must be true or false, got {raw!r}")


def _str(key, raw):
    return str(raw).strip()


PARSERS = {
    "experiment": _str,
    "n": _int,
    "alpha": _float,
    "alphas": _alphas,
    "beta": lambda k, v: _float(k, v, allow_inf=True),
    "dt": _float,
    "theta": _float,
    "T": _float,
    "snapshot_stride": _int,
    "profile": _str,
    "seed": _int,
    "replicas": _int,
    "epsilon": _float,
    "times": lambda k, v: _list(k, v, _float),
    "n_list": lambda k, v: _list(k, v, _int),
    "betas": lambda k, v: _list(k, v, lambda kk, vv: _float(kk, vv, allow_inf=True)),
    "n_ref": _int,
    "dt_ref": _float,
    "long_form": _bool,
    "output": _str,
    "workers": _int,
}

assert set(PARSERS) == {f.name for f in fields(RunSpec)}


def _require(cond, key, msg):
    if not cond:
        raise ConfigError(key, msg)


def validate(spec: RunSpec) -> RunSpec:
    _require(spec.experiment in EXPERIMENTS, "experiment",
             f"experiment must be one of {', '.join(EXPERIMENTS)}, got {spec.experiment!r}")
    _require(spec.n >= 3, "n", "n must be >= 3")
    _require(spec.alpha > 0, "alpha", "alpha must be > 0")
    _require(all(a > 0 for a in spec.alphas), "alphas", "alphas must all be > 0")
    _require(spec.beta >= 0, "beta", "beta must be in [0, inf]")
    _require(all(b >= 0 for b in spec.betas), "betas", "betas must all be in [0, inf]")
    _require(spec.dt > 0, "dt", "dt must be > 0")
    _require(spec.T > 0, "T", "T must be > 0")
    _require(spec.dt <= spec.T, "dt", "dt must be <= T")
    _require(0.0 <= spec.theta <= 1.0, "theta", "theta must be in [0, 1]")
    _require(spec.snapshot_stride >= 1, "snapshot_stride", "snapshot_stride must be >= 1")
    steps = round(spec.T / spec.dt)
    _require(abs(steps * spec.dt - spec.T) <= 1e-9 * spec.T, "T", "T must be an integer multiple of dt")
    _require(steps % spec.snapshot_stride == 0, "snapshot_stride",
             f"snapshot_stride must divide the step count T/dt = {steps}")
    try:
        get_profile(spec.profile)
    except ValueError as exc:
        raise ConfigError("profile", str(exc)) from None
    _require(0 <= spec.seed < 2 ** 64, "seed", "seed must be in [0, 2**64)")
    _require(spec.replicas >= 1, "replicas", "replicas must be >= 1")
    _require(0 < spec.epsilon < 0.5, "epsilon", "epsilon must be in (0, 1/2)")
    _require(all(t >= 0 for t in spec.times), "times", "times must be >= 0")
    _require(list(spec.times) == sorted(spec.times), "times", "times must be sorted")
    _require(all(m >= 3 for m in spec.n_list), "n_list", "n_list entries must be >= 3")
    _require(spec.n_ref >= 3, "n_ref", "n_ref must be >= 3")
    _require(spec.dt_ref > 0, "dt_ref", "dt_ref must be > 0")
    _require(spec.workers >= 1, "workers", "workers must be >= 1")
    if spec.experiment in ("simulate", "hydro-compare"):
        _require(in_unit_range(spec.profile), "profile",
                 "profile must take values in [0, 1] for particle simulations")
        _require(spec.epsilon * spec.n >= 1, "epsilon", "epsilon * n must be >= 1")
        _require(max(spec.times) > 0, "times", "times must include a positive time")
    if spec.experiment == "hydro-compare":
        _require(spec.replicas >= 2, "replicas", "replicas must be >= 2 for standard errors")
        t_max = max(spec.times)
        k = round(t_max / spec.dt_ref)
        _require(abs(k * spec.dt_ref - t_max) <= 1e-9 * t_max, "dt_ref",
                 "the largest time must be an integer multiple of dt_ref")
    return spec


def read_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"config file not found: {p}")
    out = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError("config", f"{p}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, val = text.partition("=")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def parse_config(path=None, overrides: Mapping | None = None) -> RunSpec:
    """Build a validated :class:`RunSpec` from an optional file plus overrides.

    Overrides win over file entries; keys may use dashes or underscores.
    """
    raw: dict = {}
    if path is not None:
        raw.update(read_config_file(path))
    for key, val in (overrides or {}).items():
        if val is not None:
            raw[key.replace("-", "_")] = val
    values = {}
    for key, val in raw.items():
        if key not in PARSERS:
            raise ConfigError(key, f"unknown key {key!r}")
        values[key] = PARSERS[key](key, val)
    return validate(RunSpec(**values))
