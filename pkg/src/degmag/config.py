"""Run configuration: TOML file, environment overrides, flag overrides, stable hash.

Environment variables ``DEGMAG__<section>__<key>=<value>`` override file
values; the value is parsed as a TOML literal when possible (``1e-3``,
``[2, 3]``, ``true``) and kept as a string otherwise. Keys under ``[run]``
that only affect scheduling (``workers``, ``out``) are excluded from the hash
so outputs do not depend on them.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib as _toml
except ModuleNotFoundError:  # Python < 3.11
    import tomli as _toml

ENV_PREFIX = "DEGMAG__"
RUNTIME_KEYS = {"workers", "out"}


class ConfigError(ValueError):
    """Unreadable or invalid configuration."""


DEFAULTS: dict = {
    "run": {"workers": 0, "out": "out", "seed": 12345},
    "params": {"nu": 2, "ell": 1, "mu": 25.0, "h": 0.2, "W": 1.0},
    "branch": {"eta_lo": -5.0, "eta_hi": 5.0, "eta_n": 21, "n_branches": 3, "ppl": 120.0, "pad": 5.0,
               "rtol": 1e-13},
    "fit_kappa": {"eta_lo": 1e2, "eta_hi": 1e4, "eta_n": 9, "ppl": 160.0},
    "fit_decay": {"eta_lo": 1.0, "eta_hi": 16.0, "eta_n": 31, "window": [2.0, 15.0], "pad": 16.0},
    "zeros": {"eta_lo": -5.0, "eta_hi": 10.0, "eta_n": 61, "n_branches": 5},
    "perturb": {"nu": [2, 3, 4, 5], "ell": [0, 1, 2, 3]},
    "grid": {"nu": 2, "ell": 1, "W": [1.0], "coupling": [1.0], "h": [0.2]},
    "ids": {"tau": 0.0, "psi1": [-0.5, -0.25, 0.25, 0.5], "psi2": [-0.5, -0.25, 0.25, 0.5],
            "x1_extent": 0.4, "cut_constant": 1.0},
    "sweep": {"y1_half": 4.0, "y2_half": 4.0, "n1": 200, "n2": 200, "x2_length": 0.0, "mode": "count",
              "scheme": "peierls", "tau": 0.0},
    "oracle2d": {"x1": [-0.8, 0.8], "x2": [-0.8, 0.8], "n1": 160, "n2": 160, "tau": 0.0, "scheme": "peierls"},
    "verify": {"only": []},
}


@dataclass
class RunConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    source: str = "<defaults>"

    def section(self, name: str) -> dict:
        return self.data.get(name, {})

    def get(self, section: str, key: str, default=None):
        return self.data.get(section, {}).get(key, default)

    def hashed_view(self) -> dict:
        d = copy.deepcopy(self.data)
        for k in RUNTIME_KEYS:
            d.get("run", {}).pop(k, None)
        return d

    @property
    def hash(self) -> str:
        blob = json.dumps(self.hashed_view(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_json(self) -> dict:
        return {"source": self.source, "hash": self.hash, "data": self.data}


def _merge(base: dict, over: dict, path: str = "") -> None:
    for k, v in over.items():
        if isinstance(v, dict):
            if k not in base:
                base[k] = {}
            if not isinstance(base[k], dict):
                raise ConfigError(f"{path}{k} must be a table")
            _merge(base[k], v, f"{path}{k}.")
        elif isinstance(base.get(k), dict):
            raise ConfigError(f"{path}{k} must be a table, got {v!r}")
        else:
            base[k] = v


def _parse_literal(text: str):
    try:
        return _toml.loads(f"v = {text}")["v"]
    except _toml.TOMLDecodeError:
        return text


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out: dict = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        parts = name[len(ENV_PREFIX):].split("__")
        if len(parts) != 2 or not all(parts):
            raise ConfigError(f"environment override {name} must look like {ENV_PREFIX}section__key")
        out.setdefault(parts[0].lower(), {})[parts[1].lower()] = _parse_literal(value)
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None, environ=None) -> RunConfig:
    """Defaults, then the file, then the environment, then explicit overrides."""
    data = copy.deepcopy(DEFAULTS)
    source = "<defaults>"
    if path is not None:
        p = Path(path)
        try:
            with open(p, "rb") as fh:
                file_data = _toml.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {p}") from exc
        except _toml.TOMLDecodeError as exc:
            raise ConfigError(f"config parse error in {p}: {exc}") from exc
        _merge(data, file_data)
        source = str(p)
    _merge(data, env_overrides(environ))
    if overrides:
        _merge(data, overrides)
    _validate(data)
    return RunConfig(data, source)


def _validate(data: dict) -> None:
    w = data["run"].get("workers")
    if not isinstance(w, int) or w < 0:
        raise ConfigError("run.workers must be a nonnegative integer (0 = all cores)")
    p = data["params"]
    if not isinstance(p.get("nu"), int) or p["nu"] < 2:
        raise ConfigError("params.nu must be an integer >= 2")
    if not isinstance(p.get("ell"), int) or p["ell"] < 0:
        raise ConfigError("params.ell must be an integer >= 0")
    for k in ("mu", "h", "W"):
        if not isinstance(p.get(k), (int, float)):
            raise ConfigError(f"params.{k} must be a number")
