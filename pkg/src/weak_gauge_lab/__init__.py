"""
Weak Gauge Lab - gauge-invariant weak values for a charged particle.

This package propagates a charged particle through electromagnetic gauges,
evaluates weak values and their time derivatives, integrates Bohmian
trajectories and recovers electric and magnetic fields from weak-value
derivatives along them.
"""

try:
    from ._version import version as __version__
except ImportError:
    __version__ = "0.1.0"

from .core.laboratory import Laboratory, RunReport, run_scenario
from .core.self_check import self_check
from .utils.config import ScenarioConfig, load_config, parse_config

__all__ = [
    "Laboratory",
    "RunReport",
    "run_scenario",
    "self_check",
    "ScenarioConfig",
    "load_config",
    "parse_config",
]
