"""TOML pipeline config: loading, defaults, and validation."""

from __future__ import annotations

import os

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigError

_DEFAULTS = {
    "dataset": {"language": "en"},
    "backends": {"mode": "fixture", "d_s": 768, "d_b": 768, "batch_size": 20,
                 "model": "gpt-4o", "temperature": 0.0},
    "sgs": {"optimize": True, "k_max": 10},
    "graph": {"percentile": 0.90},
    "gnn": {},
    "extraction": {"k": 50},
    "run": {"seed": 0, "output_dir": "runs"},
}

_REQUIRED = {
    "dataset": ("corpus",),
}


def load_config(path, overrides=None):
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    merged = {}
    for section, defaults in _DEFAULTS.items():
        merged[section] = {**defaults, **cfg.get(section, {})}
    for section in cfg:
        if section not in merged:
            merged[section] = dict(cfg[section])
    if overrides:
        for dotted, value in overrides.items():
            section, key = dotted.split(".", 1)
            merged.setdefault(section, {})[key] = value
    validate_config(merged)
    return merged


def validate_config(cfg):
    for section, keys in _REQUIRED.items():
        for key in keys:
            if key not in cfg.get(section, {}):
                raise ConfigError(f"config missing [{section}] {key}")
    if not os.path.exists(cfg["dataset"]["corpus"]):
        raise ConfigError(f"corpus not found: {cfg['dataset']['corpus']}")
    if cfg["dataset"]["language"] not in ("en", "fr"):
        raise ConfigError("dataset.language must be 'en' or 'fr'")
    b = cfg["backends"]
    if b["mode"] == "fixture":
        if "fixture_dir" not in b or not os.path.isdir(b["fixture_dir"]):
            raise ConfigError("fixture backend needs an existing fixture_dir")
    elif b["mode"] == "http":
        for key in ("chat_endpoint", "embed_endpoint", "cache_dir"):
            if key not in b:
                raise ConfigError(f"http backend needs backends.{key}")
    else:
        raise ConfigError(f"unknown backends.mode {b['mode']!r}")
    if b["d_s"] < 1 or b["d_b"] < 1:
        raise ConfigError("embedding dimensions must be >= 1")
    if cfg["extraction"]["k"] < 1:
        raise ConfigError("extraction.k must be >= 1")
    if not 0.0 < cfg["graph"]["percentile"] < 1.0:
        raise ConfigError("graph.percentile must be in (0,1)")
    scfg = cfg["sgs"]
    if not scfg.get("optimize", True):
        if "w_wmd" not in scfg or "w_idf" not in scfg:
            raise ConfigError("pinned SGS weights need sgs.w_wmd and sgs.w_idf")
    if "composite" in cfg:
        total = sum(cfg["composite"].values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"composite weights sum to {total}, expected 1")
    return cfg
