"""Run configuration: a flat TOML document mapped onto :class:`RunConfig`.

Example::

    n_cells = 256
    epsilon = 0.1
    beta = 1.0
    t_end = 1.0
    ic = "sine_perturbation"
    snapshot_every = 50
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields

import tomli
import tomli_w

from .initial import BUILTINS
from .integrator import StepConfig
from .state import Params


class ConfigError(ValueError):
    """Invalid configuration. ``key`` names the offending entry, ``line`` the
    document line for syntax errors."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        super().__init__(message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    n_cells: int
    epsilon: float
    beta: float
    t_end: float
    # builtin name or path to a snapshot file
    ic: str
    nu: float = 1.0
    gas_const: float = 1.0
    c_v: float = 1.0
    kappa_tilde: float = 1.0
    dt_init: float = 1e-3
    cfl_safety: float = 0.4
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    dt_min: float = 1e-12
    dt_fixed: float | None = None
    extrapolate: bool = True
    ic_amplitude: float = 0.2
    normalize_energy: bool = False
    snapshot_every: int | None = None
    snapshot_interval: float | None = None
    output_dir: str = "output"
    fail_fast: bool = False
    seed: int = 0

    @property
    def params(self) -> Params:
        return Params(epsilon=self.epsilon, beta=self.beta, nu=self.nu, gas_const=self.gas_const,
                      c_v=self.c_v, kappa_tilde=self.kappa_tilde)

    @property
    def step(self) -> StepConfig:
        return StepConfig(dt_init=self.dt_init, cfl_safety=self.cfl_safety,
                          picard_tol=self.picard_tol, picard_max_iter=self.picard_max_iter,
                          dt_min=self.dt_min, dt_fixed=self.dt_fixed, extrapolate=self.extrapolate)

    @property
    def ic_is_builtin(self) -> bool:
        return self.ic in BUILTINS


_REQUIRED = ("n_cells", "epsilon", "beta", "t_end", "ic")
_KEYS = {f.name: f for f in fields(RunConfig)}
_INTS = {"n_cells", "picard_max_iter", "snapshot_every", "seed"}
_BOOLS = {"extrapolate", "normalize_energy", "fail_fast"}
_STRS = {"ic", "output_dir"}
_POSITIVE = {"epsilon", "nu", "gas_const", "c_v", "kappa_tilde", "dt_init", "picard_tol",
             "dt_min", "dt_fixed", "t_end", "snapshot_interval", "snapshot_every",
             "picard_max_iter"}


def _check_type(key, value):
    if key in _BOOLS:
        ok = isinstance(value, bool)
        kind = "a boolean"
    elif key in _INTS:
        ok = isinstance(value, int) and not isinstance(value, bool)
        kind = "an integer"
    elif key in _STRS:
        ok = isinstance(value, str)
        kind = "a string"
    else:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        kind = "a number"
    if not ok:
        raise ConfigError(f"{key} must be {kind}, got {value!r}", key=key)


def _check_value(key, value):
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{key} must be finite, got {value!r}", key=key)
    if key in _POSITIVE and not value > 0:
        raise ConfigError(f"{key} must be positive, got {value!r}", key=key)
    if key == "beta" and value < 0:
        raise ConfigError(f"beta must be nonnegative, got {value!r}", key=key)
    if key == "n_cells" and value < 2:
        raise ConfigError(f"n_cells must be at least 2, got {value!r}", key=key)
    if key == "cfl_safety" and not 0 < value <= 1:
        raise ConfigError(f"cfl_safety must lie in (0, 1], got {value!r}", key=key)
    if key == "ic_amplitude" and not 0 < value < 0.5:
        raise ConfigError(f"ic_amplitude must lie in (0, 0.5), got {value!r}", key=key)
    if key == "seed" and not 0 <= value < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {value!r}", key=key)


def parse_config(text: str, base_dir: str | os.PathLike | None = None) -> RunConfig:
    """Parse and validate a TOML run configuration.

    Relative paths (a file initial condition and ``output_dir``) are resolved
    against ``base_dir`` (default: the working directory).
    """
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        where = f" at line {line}" if line is not None else ""
        raise ConfigError(f"syntax error{where}: {getattr(exc, 'msg', exc)}", line=line) from None
    unknown = sorted(set(doc) - set(_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}", key=unknown[0])
    missing = [k for k in _REQUIRED if k not in doc]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}", key=missing[0])
    for key, value in doc.items():
        _check_type(key, value)
        _check_value(key, value)
    if "snapshot_every" in doc and "snapshot_interval" in doc:
        raise ConfigError("give at most one of snapshot_every and snapshot_interval",
                          key="snapshot_interval")
    if "snapshot_every" not in doc and "snapshot_interval" not in doc:
        doc["snapshot_every"] = 100

    base = os.fspath(base_dir) if base_dir is not None else os.getcwd()
    if doc["ic"] not in BUILTINS:
        path = os.path.abspath(os.path.join(base, doc["ic"]))
        if not os.path.isfile(path):
            raise ConfigError(
                f"ic {doc['ic']!r} is neither a builtin ({', '.join(BUILTINS)}) "
                f"nor an existing file", key="ic")
        doc["ic"] = path
    doc["output_dir"] = os.path.abspath(os.path.join(base, doc.get("output_dir", "output")))
    for key in ("epsilon", "beta", "t_end", "nu", "gas_const", "c_v", "kappa_tilde", "dt_init",
                "cfl_safety", "picard_tol", "dt_min", "dt_fixed", "ic_amplitude",
                "snapshot_interval"):
        if key in doc:
            doc[key] = float(doc[key])
    return RunConfig(**doc)


def serialize_config(cfg: RunConfig) -> str:
    """TOML text that :func:`parse_config` maps back to ``cfg``."""
    doc = {}
    for name in _KEYS:
        value = getattr(cfg, name)
        if value is not None:
            doc[name] = value
    return tomli_w.dumps(doc)


def load_config(path: str | os.PathLike) -> RunConfig:
    """Read ``path``; relative paths inside resolve against its directory."""
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))
