"""Flat `key = value` run configuration with strict key checking.

Precedence: built-in defaults < config file < command-line overrides.
Unknown keys are a hard error so typos never pass silently.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError

# key -> (type, default). bool values are written as true/false.
SCHEMA = {
    "seed": (int, 42),
    # synthetic generator
    "pairs": (int, 2048),
    "latent_dim": (int, 16),
    "noise_cmb": (float, 0.0),
    "noise_isd": (float, 0.0),
    "captions_per_image": (int, 1),
    "feature_dim": (int, 64),
    "image_dim": (int, 256),
    "text_teacher_dim": (int, 768),
    # objective hyperparameters
    "tau": (float, 0.05),
    "tau_dist": (float, 1.0),
    "lambda": (float, 0.1),
    "mu": (float, 0.2),
    "margin": (float, 0.2),
    # training
    "batch_size": (int, 128),
    "learning_rate": (float, 1e-3),
    "steps": (int, 2000),
    "eval_every": (int, 125),
    "dropout": (float, 0.1),
    "hidden_dim": (int, 768),
    "text_dim": (int, 768),
    "shared_dim": (int, 256),
    "init_gain": (float, 1.0),
    "holdout": (int, 256),
    "reduction": (str, "sum"),
    "reshuffle_per_epoch": (bool, False),
    # paths
    "data_dir": (str, "data"),
    "out_dir": (str, "out"),
}


def _parse_value(key: str, raw: str):
    typ, _ = SCHEMA[key]
    raw = raw.strip()
    try:
        if typ is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"bad value for '{key}': {raw!r} (expected {typ.__name__})")


def defaults() -> dict:
    return {k: v for k, (_, v) in SCHEMA.items()}


def parse_config_file(path) -> dict:
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        values[key] = _parse_value(key, raw)
    return values


def resolve(file_values: dict | None = None, overrides: dict | None = None) -> dict:
    """Merge defaults, config file, and CLI overrides (in that order)."""
    cfg = defaults()
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key '{key}'")
            cfg[key] = value
    return cfg


def to_text(cfg: dict) -> str:
    """Render a resolved config; feeding it back reproduces the run."""
    lines = []
    for key in SCHEMA:
        value = cfg[key]
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
