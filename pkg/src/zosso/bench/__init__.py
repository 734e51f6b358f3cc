"""Benchmark harness: presets, run configuration, ZO-SGD baseline and the CLI."""

from zosso.bench.baseline import run_zo_sgd, sgd_update, zo_sgd_baseline_step
from zosso.bench.config import RunConfig, load_config, parse_config
from zosso.bench.presets import PRESETS, Preset, get_preset
from zosso.bench.runner import execute, run_config

__all__ = [
    "PRESETS",
    "Preset",
    "RunConfig",
    "execute",
    "get_preset",
    "load_config",
    "parse_config",
    "run_config",
    "run_zo_sgd",
    "sgd_update",
    "zo_sgd_baseline_step",
]
