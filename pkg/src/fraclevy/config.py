"""Run configuration: one JSON document with blocks model/grid/experiment/solver/output.

:func:`load_config` merges a document over :data:`DEFAULTS` and validates it;
violations raise :class:`ConfigError` naming the offending field.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .levy_models import DiscretizedMeasure, LevyModel, discretize_measure

EXPERIMENTS = ("simulate", "wiener", "volterra", "sde")
MODELS = ("two_point", "gaussian_jumps", "tempered_stable")
KERNEL_PRESETS = ("constant", "exponential", "polynomial")
BACKENDS = ("chaos_picard", "chaos_resolvent", "s_collocation")

DEFAULTS: Dict[str, Any] = {
    "model": {"name": "two_point", "params": {}, "epsilon": 1e-3, "n_atoms_per_side": 32},
    "grid": {"t_min": -2.0, "t_max": 1.0, "h": 1.0 / 64},
    "experiment": {
        "kind": "simulate",
        "beta": 0.25,
        "seed": 2024,
        "n_paths": 1000,
        "times": None,
        "history": "auto",
        "integrand": {"kind": "bump", "center": 0.5, "radius": 0.4},
        "horizon": 1.0,
        "n_steps": 100,
        "a": 1.0,
        "b": {"preset": "constant", "c": 0.0},
        "sigma": {"preset": "constant", "c": 0.0},
        "U0": 1.0,
        "drift": {"c0": 0.0, "c1": 0.0},
        "diffusion": {"c0": 0.0, "c1": 0.5},
    },
    "solver": {
        "backend": "chaos_picard",
        "tol": 1e-12,
        "max_iter": 200,
        "order": 4,
        "basis_cells": 8,
        "basis_t_min": -1.0,
        "mark_mode": "separable",
        "n_probes": 10,
        "probe_seed": 2024,
        "p": 2.0,
        "tolerances": {},
    },
    "output": {"dir": None, "max_paths_csv": 100, "chaos_dumps": 3},
}


class ConfigError(ValueError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"config field '{field}': {reason}")
        self.field = field
        self.reason = reason


def _merge(base: dict, over: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        name = f"{prefix}{k}"
        if k not in base:
            raise ConfigError(name, "unknown field")
        if isinstance(base[k], dict) and k not in ("params", "tolerances", "integrand", "b", "sigma", "drift", "diffusion"):
            if not isinstance(v, dict):
                raise ConfigError(name, "expected an object")
            out[k] = _merge(base[k], v, name + ".")
        else:
            out[k] = copy.deepcopy(v)
    return out


def _number(cfg, block, key, lo=-math.inf, hi=math.inf, open_lo=False, open_hi=False, integer=False):
    v = cfg[block][key]
    name = f"{block}.{key}"
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(name, f"expected a finite number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(name, f"expected an integer, got {v!r}")
    bad_lo = v <= lo if open_lo else v < lo
    bad_hi = v >= hi if open_hi else v > hi
    if bad_lo or bad_hi:
        lb = "(" if open_lo else "["
        rb = ")" if open_hi else "]"
        raise ConfigError(name, f"value {v} outside admissible range {lb}{lo:g}, {hi:g}{rb}")
    return v


def validate(cfg: dict) -> dict:
    m = cfg["model"]
    if m["name"] not in MODELS:
        raise ConfigError("model.name", f"unknown model {m['name']!r}; choose from {', '.join(MODELS)}")
    _number(cfg, "model", "epsilon", 0.0, 1.0, open_lo=True, open_hi=True)
    _number(cfg, "model", "n_atoms_per_side", 1, 10_000, integer=True)
    try:
        build_model(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError("model.params", str(exc)) from exc
    _number(cfg, "grid", "h", 0.0, open_lo=True)
    t_min = _number(cfg, "grid", "t_min", hi=0.0, open_hi=True)
    _number(cfg, "grid", "t_max", 0.0, open_lo=True)
    for key in ("t_min", "t_max"):
        n = cfg["grid"][key] / cfg["grid"]["h"]
        if abs(n - round(n)) > 1e-9 * max(1.0, abs(n)):
            raise ConfigError(f"grid.{key}", "must be a multiple of grid.h so that 0 is a grid edge")
    e = cfg["experiment"]
    if e["kind"] not in EXPERIMENTS:
        raise ConfigError("experiment.kind", f"unknown experiment {e['kind']!r}; choose from {', '.join(EXPERIMENTS)}")
    b = e["beta"]
    if isinstance(b, bool) or not isinstance(b, (int, float)) or not 0.0 < b < 0.5:
        raise ConfigError("experiment.beta", f"value {b!r} outside admissible range (0, 1/2)")
    _number(cfg, "experiment", "seed", 0, 2**63 - 1, integer=True)
    _number(cfg, "experiment", "n_paths", 2, 10**8, integer=True)
    _number(cfg, "experiment", "horizon", 0.0, open_lo=True)
    _number(cfg, "experiment", "n_steps", 1, 10**6, integer=True)
    if e["history"] not in ("auto", "none"):
        raise ConfigError("experiment.history", "must be 'auto' or 'none'")
    if e["times"] is not None:
        ts = e["times"]
        if not isinstance(ts, list) or not all(isinstance(t, (int, float)) for t in ts):
            raise ConfigError("experiment.times", "expected a list of numbers")
        if any(t < t_min or t > cfg["grid"]["t_max"] for t in ts):
            raise ConfigError("experiment.times", "times must lie inside the grid")
    for key in ("b", "sigma"):
        k = e[key]
        if not isinstance(k, dict) or k.get("preset") not in KERNEL_PRESETS:
            raise ConfigError(f"experiment.{key}", f"expected {{'preset': one of {', '.join(KERNEL_PRESETS)}, ...}}")
    for key in ("drift", "diffusion"):
        k = e[key]
        if not isinstance(k, dict) or set(k) - {"c0", "c1"}:
            raise ConfigError(f"experiment.{key}", "expected {'c0': number, 'c1': number}")
    ig = e["integrand"]
    if not isinstance(ig, dict) or ig.get("kind") not in ("bump", "indicator"):
        raise ConfigError("experiment.integrand.kind", "must be 'bump' or 'indicator'")
    s = cfg["solver"]
    if s["backend"] not in BACKENDS:
        raise ConfigError("solver.backend", f"unknown backend {s['backend']!r}; choose from {', '.join(BACKENDS)}")
    if s["mark_mode"] not in ("atoms", "separable"):
        raise ConfigError("solver.mark_mode", "must be 'atoms' or 'separable'")
    _number(cfg, "solver", "tol", 0.0, open_lo=True)
    _number(cfg, "solver", "max_iter", 1, 10**6, integer=True)
    _number(cfg, "solver", "order", 0, 12, integer=True)
    _number(cfg, "solver", "basis_cells", 1, 4096, integer=True)
    _number(cfg, "solver", "basis_t_min", hi=0.0)
    _number(cfg, "solver", "n_probes", 1, 1000, integer=True)
    _number(cfg, "solver", "probe_seed", 0, 2**63 - 1, integer=True)
    _number(cfg, "solver", "p", 1.0, open_lo=True)
    if not isinstance(s["tolerances"], dict):
        raise ConfigError("solver.tolerances", "expected an object")
    from .verification import DEFAULT_TOLERANCES

    for k in s["tolerances"]:
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"solver.tolerances.{k}", "unknown tolerance")
    _number(cfg, "output", "max_paths_csv", 0, 10**7, integer=True)
    _number(cfg, "output", "chaos_dumps", 0, 10**4, integer=True)
    if cfg["output"]["dir"] is not None and not isinstance(cfg["output"]["dir"], str):
        raise ConfigError("output.dir", "expected a path string or null")
    return cfg


def load_config(source: Union[str, Path, dict, None] = None, seed: Optional[int] = None) -> dict:
    """Parse (path, JSON text or dict), merge over defaults, apply a seed override, validate."""
    if source is None:
        doc = {}
    elif isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError("--config", f"file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("--config", f"invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a JSON object")
    cfg = _merge(DEFAULTS, doc)
    if seed is not None:
        cfg["experiment"]["seed"] = int(seed)
    return validate(cfg)


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical JSON form."""
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def build_model(cfg: dict) -> LevyModel:
    m = cfg["model"]
    params = dict(m["params"])
    if m["name"] == "two_point":
        return LevyModel.two_point(**params)
    if m["name"] == "gaussian_jumps":
        return LevyModel.gaussian_jumps(**params)
    return LevyModel.tempered_stable(**params)


def build_measure(cfg: dict) -> DiscretizedMeasure:
    m = cfg["model"]
    return discretize_measure(build_model(cfg), epsilon=m["epsilon"], n_atoms_per_side=int(m["n_atoms_per_side"]))
