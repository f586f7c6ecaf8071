"""Federated learning simulator with certifiably robust aggregation against backdoors.

The pipeline reweights clients by how alike their accumulated updates look,
aggregates with a trust-weighted geometric median, clips and perturbs the
global model, and certifies predictions by randomized smoothing.
"""
from .aggregation import AGGREGATORS, WpcraParams, aggregate_wpcra, wgme
from .certification import CertConfig, certified_radius, certify, clip_and_perturb, rho_schedule
from .config import PRESETS, ConfigError, ExperimentConfig, load_config, parse_config
from .engine import run_experiment
from .harness import run, sweep
from .metrics import MetricsReport

__version__ = "0.1.0"

__all__ = [
    "AGGREGATORS",
    "CertConfig",
    "ConfigError",
    "ExperimentConfig",
    "MetricsReport",
    "PRESETS",
    "WpcraParams",
    "aggregate_wpcra",
    "certified_radius",
    "certify",
    "clip_and_perturb",
    "load_config",
    "parse_config",
    "rho_schedule",
    "run",
    "run_experiment",
    "sweep",
    "wgme",
]
