"""
Utility modules for Weak Gauge Lab: logging, exceptions and scenario configuration.
"""

from .logger import setup_logging, get_logger, PerformanceTimer
from .exceptions import WeakGaugeLabError, ConfigurationError, NumericalError

__all__ = [
    "setup_logging",
    "get_logger",
    "PerformanceTimer",
    "WeakGaugeLabError",
    "ConfigurationError",
    "NumericalError",
]
