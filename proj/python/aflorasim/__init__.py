"""Desk-scale federated LoRA fine-tuning simulator."""

import json as _json

from ._core import (  # noqa: F401
    ConfigError,
    SimulatorError,
    default_config,
    frobenius_norm,
    interference_gap,
    matmul,
    methods,
    run_csv,
    svd,
    transpose,
)
from ._core import run_experiment as _run_experiment_text


def run_experiment(config):
    """Run one experiment.

    `config` may be a JSON string or a dict of overrides layered onto
    `default_config()`.
    """
    if isinstance(config, str):
        return _run_experiment_text(config)
    merged = _json.loads(default_config())
    _merge(merged, dict(config))
    return _run_experiment_text(_json.dumps(merged))


def _merge(base, overrides):
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value


__all__ = [
    "ConfigError",
    "SimulatorError",
    "default_config",
    "frobenius_norm",
    "interference_gap",
    "matmul",
    "methods",
    "run_csv",
    "run_experiment",
    "svd",
    "transpose",
]
