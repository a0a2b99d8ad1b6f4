"""
Result persistence for Weak Gauge Lab.

This module writes the CSV tables, the plain-text run manifest and the
machine-readable error record of a scenario run. All writes go through one
ResultsStore so files are never interleaved.
"""

import json
import logging
import platform
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import cpuinfo
import pandas as pd
import psutil

from .. import constants
from ..core.bohmian import Trajectory
from ..core.sensing import SensorReading
from ..utils.exceptions import ResultsStoreError

FLOAT_FORMAT = "%.12e"

DERIVATIVE_COLUMNS = ["theta_rad", "stride_s", "fdlhd_m_per_s", "fdrhd_m_per_s", "lhd_m_per_s", "rhd_m_per_s", "flagged"]


@dataclass(frozen=True)
class DerivativeRow:
    theta: float
    stride: float
    fdlhd: float
    fdrhd: float
    lhd: float
    rhd: float
    flagged: bool


@dataclass(frozen=True)
class WeakValueRow:
    """One weak value anchored at a trajectory point."""
    traj_id: int
    t: float
    position: tuple
    observable: str
    value: complex
    flagged: bool


def _position_columns(ndim: int) -> List[str]:
    return ["x_m", "y_m"][:ndim]


class ResultsStore:
    """Single writer for one run's output directory."""

    def __init__(self, out_dir: Path) -> None:
        """
        Initialize the store.

        Args:
            out_dir: Output directory (created on first write)
        """
        self.logger = logging.getLogger("weak_gauge_lab.data.results_store")
        self.out_dir = Path(out_dir)
        self._lock = threading.Lock()
        self._written: List[str] = []

    @property
    def written(self) -> List[str]:
        return list(self._written)

    def _write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.out_dir / name
        try:
            with self._lock:
                self.out_dir.mkdir(parents=True, exist_ok=True)
                frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
                self._written.append(name)
        except OSError as e:
            self.logger.error(f"Failed to write {path}: {e}")
            raise ResultsStoreError(f"Failed to write {name}: {e}", details=str(path))
        self.logger.info(f"Wrote {len(frame)} rows to {path}")
        return path

    def write_derivatives(self, rows: Sequence[DerivativeRow]) -> Path:
        frame = pd.DataFrame(
            [(r.theta, r.stride, r.fdlhd, r.fdrhd, r.lhd, r.rhd, int(r.flagged)) for r in rows],
            columns=DERIVATIVE_COLUMNS,
        )
        return self._write_frame("derivatives.csv", frame)

    def write_trajectories(self, trajectories: Sequence[Trajectory]) -> Path:
        ndim = trajectories[0].ndim if trajectories else 1
        records = []
        for traj in trajectories:
            for t, pos in zip(traj.times, traj.positions):
                records.append((traj.traj_id, t, *pos))
        frame = pd.DataFrame(records, columns=["traj_id", "t_s"] + _position_columns(ndim))
        return self._write_frame("trajectories.csv", frame)

    def write_weak_values(self, rows: Sequence[WeakValueRow]) -> Path:
        ndim = len(rows[0].position) if rows else 1
        frame = pd.DataFrame(
            [(r.traj_id, r.t, *r.position, r.observable, r.value.real, r.value.imag, int(r.flagged)) for r in rows],
            columns=["traj_id", "t_s"] + _position_columns(ndim)
            + ["observable", "value_real", "value_imag", "flagged"],
        )
        return self._write_frame("weak_values.csv", frame)

    def write_sensor(self, readings: Sequence[SensorReading]) -> Path:
        """Sensor readings in (time, trajectory) order."""
        ndim = len(readings[0].position) if readings else 1
        ordered = sorted(readings, key=lambda r: (r.t, r.traj_id))
        frame = pd.DataFrame(
            [(r.t, *r.position, r.estimate, r.unit, int(r.flagged)) for r in ordered],
            columns=["t_s"] + _position_columns(ndim) + ["estimate", "unit", "flagged"],
        )
        return self._write_frame("sensor.csv", frame)

    def write_manifest(
        self,
        config: Dict[str, Any],
        acceptance: Sequence[str],
        norm_drift: Optional[float] = None,
        extra: Optional[Dict[str, Any]] = None,
    ) -> Path:
        """
        Plain-text manifest: constants, configuration, host, norm drift and
        acceptance lines. Only the timestamp differs between identical runs.
        """
        lines = ["# weak-gauge-lab run manifest", f"created: {datetime.now(timezone.utc).isoformat()}", ""]
        lines.append("[constants]")
        for name in ("CHARGE", "EFFECTIVE_MASS", "HBAR", "MEV", "DENOMINATOR_FLOOR", "DENSITY_MASK", "BOUNDARY_LEAK"):
            lines.append(f"{name.lower()} = {getattr(constants, name):.12e}")
        lines.append("")
        lines.append("[config]")
        for section, values in config.items():
            for key, value in values.items():
                lines.append(f"{section}.{key} = {value}")
        lines.append("")
        lines.append("[host]")
        for key, value in host_info().items():
            lines.append(f"{key} = {value}")
        lines.append("")
        lines.append("[run]")
        if norm_drift is not None:
            lines.append(f"norm_drift = {norm_drift:.6e}")
        for key, value in (extra or {}).items():
            lines.append(f"{key} = {value}")
        lines.append(f"files = {', '.join(self._written)}")
        lines.append("")
        lines.append("[acceptance]")
        lines.extend(acceptance)
        return self._write_text("manifest.txt", "\n".join(lines) + "\n")

    def write_error(self, record: Dict[str, Any]) -> Path:
        return self._write_text("error.json", json.dumps(record, indent=2, sort_keys=True) + "\n")

    def _write_text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        try:
            with self._lock:
                self.out_dir.mkdir(parents=True, exist_ok=True)
                path.write_text(text, encoding="utf-8")
        except OSError as e:
            self.logger.error(f"Failed to write {path}: {e}")
            raise ResultsStoreError(f"Failed to write {name}: {e}", details=str(path))
        self.logger.debug(f"Wrote {path}")
        return path


_HOST_CACHE: Dict[str, Any] = {}


def host_info() -> Dict[str, Any]:
    """Machine description for the manifest (cpu brand lookup is cached)."""
    if not _HOST_CACHE:
        try:
            brand = cpuinfo.get_cpu_info().get("brand_raw", "unknown")
        except Exception as e:
            logging.getLogger("weak_gauge_lab.data.results_store").warning(f"CPU info unavailable: {e}")
            brand = "unknown"
        _HOST_CACHE.update(
            {
                "cpu": brand,
                "physical_cores": psutil.cpu_count(logical=False),
                "logical_cores": psutil.cpu_count(logical=True),
                "memory_gb": round(psutil.virtual_memory().total / (1024**3), 2),
                "python": platform.python_version(),
                "platform": platform.platform(),
            }
        )
    return dict(_HOST_CACHE)
