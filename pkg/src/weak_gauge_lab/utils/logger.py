"""
Logging configuration for Weak Gauge Lab.

This module provides centralized logging setup with rotating log files and a
separate performance channel for timing long stepping loops.
"""

import logging
import logging.handlers
import sys
import time
from pathlib import Path
from typing import Optional

import psutil

ROOT_LOGGER = "weak_gauge_lab"
PERFORMANCE_LOGGER = "weak_gauge_lab.performance"


def default_log_dir() -> Path:
    """Return the per-user log directory."""
    return Path.home() / ".local" / "share" / "weak-gauge-lab" / "logs"


def setup_logging(
    level: int = logging.INFO,
    log_file: Optional[Path] = None,
    max_bytes: int = 10 * 1024 * 1024,  # 10MB
    backup_count: int = 5
) -> logging.Logger:
    """
    Setup logging configuration for Weak Gauge Lab.

    Args:
        level: Logging level (default: INFO)
        log_file: Path to log file (default: ~/.local/share/weak-gauge-lab/logs/lab.log)
        max_bytes: Maximum size of log file before rotation
        backup_count: Number of backup log files to keep

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(level)
    logger.handlers.clear()

    detailed_formatter = logging.Formatter(
        fmt="%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )
    simple_formatter = logging.Formatter(fmt="%(levelname)s: %(message)s")

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(simple_formatter)
    logger.addHandler(console_handler)

    if log_file is None:
        log_file = default_log_dir() / "lab.log"
    log_file.parent.mkdir(parents=True, exist_ok=True)

    file_handler = logging.handlers.RotatingFileHandler(
        log_file, maxBytes=max_bytes, backupCount=backup_count, encoding="utf-8"
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(detailed_formatter)
    logger.addHandler(file_handler)

    error_handler = logging.handlers.RotatingFileHandler(
        log_file.parent / "errors.log", maxBytes=max_bytes, backupCount=backup_count, encoding="utf-8"
    )
    error_handler.setLevel(logging.ERROR)
    error_handler.setFormatter(detailed_formatter)
    logger.addHandler(error_handler)

    perf_logger = logging.getLogger(PERFORMANCE_LOGGER)
    perf_logger.setLevel(logging.DEBUG)
    perf_logger.handlers.clear()
    perf_handler = logging.handlers.RotatingFileHandler(
        log_file.parent / "performance.log", maxBytes=max_bytes, backupCount=backup_count, encoding="utf-8"
    )
    perf_handler.setLevel(logging.DEBUG)
    perf_handler.setFormatter(detailed_formatter)
    perf_logger.addHandler(perf_handler)

    logger.propagate = False
    perf_logger.propagate = False

    return logger


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance with the specified name.

    Args:
        name: Logger name (will be prefixed with 'weak_gauge_lab')

    Returns:
        Logger instance
    """
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


def get_performance_logger() -> logging.Logger:
    """Get the performance logger for timing and profiling."""
    return logging.getLogger(PERFORMANCE_LOGGER)


def update_log_level(level: str) -> None:
    """
    Update the log level for all weak_gauge_lab loggers.

    Args:
        level: Log level string ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')
    """
    level_map = {
        "DEBUG": logging.DEBUG,
        "INFO": logging.INFO,
        "WARNING": logging.WARNING,
        "ERROR": logging.ERROR,
        "CRITICAL": logging.CRITICAL,
    }
    log_level = level_map.get(level.upper(), logging.INFO)

    main_logger = logging.getLogger(ROOT_LOGGER)
    main_logger.setLevel(log_level)
    for handler in main_logger.handlers:
        if type(handler) is logging.StreamHandler:
            handler.setLevel(log_level)

    main_logger.debug(f"Log level updated to: {level}")


class PerformanceTimer:
    """Context manager timing an operation and its resident-memory growth."""

    def __init__(self, operation: str, logger: Optional[logging.Logger] = None) -> None:
        self.operation = operation
        self.logger = logger or get_performance_logger()
        self.start_time: Optional[float] = None
        self.duration: Optional[float] = None
        self._start_rss = 0

    def __enter__(self) -> "PerformanceTimer":
        self.start_time = time.perf_counter()
        self._start_rss = psutil.Process().memory_info().rss
        self.logger.debug(f"Starting operation: {self.operation}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        if self.start_time is None:
            return
        self.duration = time.perf_counter() - self.start_time
        rss_mb = (psutil.Process().memory_info().rss - self._start_rss) / 2**20
        if exc_type is not None:
            self.logger.error(f"Operation failed: {self.operation} after {self.duration:.3f}s")
        else:
            self.logger.debug(
                f"Completed operation: {self.operation} in {self.duration:.3f}s (rss {rss_mb:+.1f} MB)"
            )
