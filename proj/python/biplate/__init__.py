"""Damped plate inverse source laboratory.

Config arguments accept a dict or a JSON string; keys not given take the
defaults from ``default_config()``.
"""

import json as _json

from . import _core
from ._core import (
    WrapAroundError,
    decay_fit,
    green_kernel,
    kappa,
    mu,
    mu_high_precision,
    multiplier,
    time_to_frequency,
)

__all__ = [
    "WrapAroundError",
    "config_hash",
    "decay_fit",
    "default_config",
    "green_kernel",
    "kappa",
    "mu",
    "mu_high_precision",
    "multiplier",
    "run_recon",
    "run_sweep",
    "run_synth",
    "run_timesim",
    "synthesize",
    "time_to_frequency",
    "verify",
]


def _text(config):
    if config is None:
        return "{}"
    return config if isinstance(config, str) else _json.dumps(config)


def default_config():
    return _json.loads(_core.default_config())


def config_hash(config=None):
    return _core.config_hash(_text(config))


def synthesize(config, k, sigma):
    return _core.synthesize(_text(config), k, sigma)


def run_synth(config, out, force=False, seed=None):
    return _core.run_synth(_text(config), str(out), force, seed)


def run_recon(config, out, dataset=None, force=False):
    return _core.run_recon(_text(config), str(dataset or ""), str(out), force)


def run_sweep(config, out, force=False):
    return _core.run_sweep(_text(config), str(out), force)


def run_timesim(config, out, force=False):
    return _core.run_timesim(_text(config), str(out), force)


def verify(out):
    return _json.loads(_core.verify(str(out)))
