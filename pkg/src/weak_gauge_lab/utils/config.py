"""
Scenario configuration for Weak Gauge Lab.

This module parses INI-style scenario files into typed settings, fills the
per-kind defaults and validates every value. Lab units (nm, fs, ps, meV, T,
V/m, 1/nm) are accepted at this boundary and converted to SI once.
"""

import configparser
import logging
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from ..constants import DEFAULT_THETA_COUNT, FS, GAUGE_AMPLITUDE, GAUGE_FREQUENCY, GAUGE_WAVENUMBER, MEV, NM, PS
from .exceptions import ConfigurationError

logger = logging.getLogger("weak_gauge_lab.config")


class ScenarioKind(Enum):
    POST_LOCALIZED = "post-localized"  # pre packet1, post packet2
    PRE_LOCALIZED = "pre-localized"  # pre packet2, post packet1
    DELOCALIZED = "delocalized"  # pre packet3, post packet4
    EFIELD = "efield"
    BFIELD = "bfield"
    CUSTOM = "custom"

    @property
    def is_derivative_sweep(self) -> bool:
        return self in (ScenarioKind.POST_LOCALIZED, ScenarioKind.PRE_LOCALIZED,
                        ScenarioKind.DELOCALIZED, ScenarioKind.CUSTOM)


@dataclass
class GridSettings:
    dx: float = 0.2 * NM
    dt: float = 0.01 * FS
    x_min: float = -800.0 * NM
    x_max: float = 1600.0 * NM
    dy: Optional[float] = None
    y_min: Optional[float] = None
    y_max: Optional[float] = None

    @property
    def is_2d(self) -> bool:
        return self.dy is not None


@dataclass
class StateSettings:
    """
    Pre/post recipes. A packet is a registry id or an explicit
    (energy J, centre m, width m) triple.
    """
    pre: str = "packet1"
    post: str = "packet2"
    pre_packet: Optional[Tuple[float, float, float]] = None
    post_packet: Optional[Tuple[float, float, float]] = None
    pre_field: Optional[Path] = None
    observable: str = "position"
    electric_field: float = 0.0
    magnetic_field: float = 0.19
    k_y: float = 0.0118 / NM
    landau_levels: int = 10


@dataclass
class GaugeSettings:
    theta_count: int = DEFAULT_THETA_COUNT
    thetas: Optional[List[float]] = None
    amplitude: float = GAUGE_AMPLITUDE
    wavenumber: float = GAUGE_WAVENUMBER
    frequency: float = GAUGE_FREQUENCY
    scheme: str = "expanded"
    table: Optional[Path] = None


@dataclass
class DerivativeSettings:
    stride_steps: List[int] = field(default_factory=lambda: [10, 20, 30, 40, 50, 60, 70, 80, 90, 100])
    sensor_stride_steps: int = 50
    landau_stride: float = 10.0 * FS


@dataclass
class RunSettings:
    kind: ScenarioKind = ScenarioKind.POST_LOCALIZED
    seed: int = 0
    trajectories: int = 10
    readings: int = 20
    duration: float = 0.2 * PS
    reading_interval: float = 10.0 * FS
    trajectory_dt: float = 1.0 * FS
    kinetic_route: str = "direct"
    workers: int = 1
    out: Path = Path("results")
    log_level: str = "INFO"


@dataclass
class ScenarioConfig:
    """Validated scenario: one settings block per INI section."""
    grid: GridSettings = field(default_factory=GridSettings)
    states: StateSettings = field(default_factory=StateSettings)
    gauge: GaugeSettings = field(default_factory=GaugeSettings)
    derivatives: DerivativeSettings = field(default_factory=DerivativeSettings)
    run: RunSettings = field(default_factory=RunSettings)

    def with_overrides(
        self,
        theta_count: Optional[int] = None,
        seed: Optional[int] = None,
        out: Optional[Path] = None,
        stride_steps: Optional[int] = None,
    ) -> "ScenarioConfig":
        """Copy with command-line overrides applied and validated."""
        gauge, run, derivatives = self.gauge, self.run, self.derivatives
        if theta_count is not None:
            _validate_value("gauge.theta_count", theta_count)
            gauge = replace(gauge, theta_count=theta_count, thetas=None)
        if seed is not None:
            _validate_value("run.seed", seed)
            run = replace(run, seed=seed)
        if out is not None:
            run = replace(run, out=Path(out))
        if stride_steps is not None:
            _validate_value("derivatives.sensor_stride_steps", stride_steps)
            derivatives = replace(derivatives, stride_steps=[stride_steps], sensor_stride_steps=stride_steps)
        return replace(self, gauge=gauge, run=run, derivatives=derivatives)

    def as_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["run"]["kind"] = self.run.kind.value
        return data


# Scenario kinds preset these [section] keys before the file's own values are read.
KIND_DEFAULTS: Dict[ScenarioKind, Dict[str, Dict[str, str]]] = {
    ScenarioKind.POST_LOCALIZED: {"states": {"pre": "packet1", "post": "packet2"}},
    ScenarioKind.PRE_LOCALIZED: {"states": {"pre": "packet2", "post": "packet1"}},
    ScenarioKind.DELOCALIZED: {"states": {"pre": "packet3", "post": "packet4"}},
    ScenarioKind.EFIELD: {
        "states": {"pre": "packet5", "post": "point", "observable": "kinetic-energy",
                   "electric_field_v_per_m": "-1e6"},
        "run": {"duration_ps": "0.2", "reading_interval_fs": "10", "trajectory_dt_fs": "1"},
    },
    ScenarioKind.BFIELD: {
        "grid": {"dx_nm": "1", "dy_nm": "1", "x_min_nm": "-700", "x_max_nm": "700",
                 "y_min_nm": "-600", "y_max_nm": "600"},
        "states": {"pre": "landau", "post": "point", "observable": "position-y"},
        "run": {"duration_ps": "20", "reading_interval_fs": "1000", "trajectory_dt_fs": "5"},
    },
    ScenarioKind.CUSTOM: {"states": {"pre": "field"}},
}


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    return int(text)


def _floats(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _ints(text: str) -> List[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _scaled(unit: float) -> Callable[[str], float]:
    return lambda text: float(text) * unit


def _packet(text: str) -> Tuple[float, float, float]:
    parts = _floats(text)
    if len(parts) != 3:
        raise ValueError("expected 'energy_meV, centre_nm, width_nm'")
    return parts[0] * MEV, parts[1] * NM, parts[2] * NM


# section -> key -> (settings attribute, converter)
SCHEMA: Dict[str, Dict[str, Tuple[str, Callable[[str], Any]]]] = {
    "grid": {
        "dx_nm": ("dx", _scaled(NM)),
        "dt_fs": ("dt", _scaled(FS)),
        "x_min_nm": ("x_min", _scaled(NM)),
        "x_max_nm": ("x_max", _scaled(NM)),
        "dy_nm": ("dy", _scaled(NM)),
        "y_min_nm": ("y_min", _scaled(NM)),
        "y_max_nm": ("y_max", _scaled(NM)),
    },
    "states": {
        "pre": ("pre", str.strip),
        "post": ("post", str.strip),
        "pre_packet": ("pre_packet", _packet),
        "post_packet": ("post_packet", _packet),
        "pre_field": ("pre_field", Path),
        "observable": ("observable", str.strip),
        "electric_field_v_per_m": ("electric_field", _float),
        "magnetic_field_t": ("magnetic_field", _float),
        "k_y_per_nm": ("k_y", _scaled(1.0 / NM)),
        "landau_levels": ("landau_levels", _int),
    },
    "gauge": {
        "theta_count": ("theta_count", _int),
        "thetas_rad": ("thetas", _floats),
        "amplitude_v_s": ("amplitude", _float),
        "wavenumber_per_m": ("wavenumber", _float),
        "frequency_rad_per_s": ("frequency", _float),
        "scheme": ("scheme", str.strip),
        "table": ("table", Path),
    },
    "derivatives": {
        "stride_steps": ("stride_steps", _ints),
        "sensor_stride_steps": ("sensor_stride_steps", _int),
        "landau_stride_fs": ("landau_stride", _scaled(FS)),
    },
    "run": {
        "kind": ("kind", lambda text: ScenarioKind(text.strip().lower())),
        "seed": ("seed", _int),
        "trajectories": ("trajectories", _int),
        "readings": ("readings", _int),
        "duration_ps": ("duration", _scaled(PS)),
        "reading_interval_fs": ("reading_interval", _scaled(FS)),
        "trajectory_dt_fs": ("trajectory_dt", _scaled(FS)),
        "kinetic_route": ("kinetic_route", str.strip),
        "workers": ("workers", _int),
        "out": ("out", Path),
        "log_level": ("log_level", lambda text: text.strip().upper()),
    },
}

_SETTINGS = {
    "grid": GridSettings,
    "states": StateSettings,
    "gauge": GaugeSettings,
    "derivatives": DerivativeSettings,
    "run": RunSettings,
}


def _positive(value: Any) -> bool:
    return value is not None and value > 0


def _validate_value(key_path: str, value: Any) -> None:
    """
    Validate one converted value.

    Raises:
        ConfigurationError: If the value is out of range
    """
    if key_path in ("grid.dx", "grid.dt", "grid.dy") and value is not None and not _positive(value):
        raise ConfigurationError(f"{key_path} must be positive", key_path=key_path)
    elif key_path == "gauge.theta_count" and (not isinstance(value, int) or value < 1):
        raise ConfigurationError("Theta count must be >= 1", key_path=key_path)
    elif key_path == "gauge.scheme" and value not in ("expanded", "peierls"):
        raise ConfigurationError("Scheme must be 'expanded' or 'peierls'", key_path=key_path)
    elif key_path == "derivatives.stride_steps" and (not value or any(k < 1 for k in value)):
        raise ConfigurationError("Stride steps must be positive integers", key_path=key_path)
    elif key_path == "derivatives.sensor_stride_steps" and (not isinstance(value, int) or value < 1):
        raise ConfigurationError("Sensor stride must be >= 1 step", key_path=key_path)
    elif key_path == "derivatives.landau_stride" and not _positive(value):
        raise ConfigurationError("Landau stride must be positive", key_path=key_path)
    elif key_path == "run.seed" and (not isinstance(value, int) or not 0 <= value < 2**64):
        raise ConfigurationError("Seed must be an integer in [0, 2^64)", key_path=key_path)
    elif key_path in ("run.trajectories", "run.readings", "run.workers", "states.landau_levels") and value < 1:
        raise ConfigurationError(f"{key_path} must be >= 1", key_path=key_path)
    elif key_path in ("run.duration", "run.reading_interval", "run.trajectory_dt") and not _positive(value):
        raise ConfigurationError(f"{key_path} must be positive", key_path=key_path)
    elif key_path == "run.kinetic_route" and value not in ("direct", "bohmian"):
        raise ConfigurationError("Kinetic route must be 'direct' or 'bohmian'", key_path=key_path)
    elif key_path == "run.log_level" and value not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        raise ConfigurationError(f"Unknown log level '{value}'", key_path=key_path)
    elif key_path == "states.magnetic_field" and not _positive(value):
        raise ConfigurationError("Magnetic field must be positive", key_path=key_path)


def _read(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigurationError("Key outside any section", details=str(e), line=e.lineno)
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ConfigurationError("Malformed configuration line", details=str(e), line=line)
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as e:
        raise ConfigurationError("Duplicate section or key", details=str(e), line=e.lineno)
    return parser


def _apply(values: Dict[str, Dict[str, Any]], section: str, key: str, raw: str) -> None:
    key_path = f"{section}.{key}"
    attribute, convert = SCHEMA[section][key]
    try:
        value = convert(raw)
    except ValueError as e:
        raise ConfigurationError(f"Invalid value '{raw}' for {key_path}", details=str(e), key_path=key_path)
    _validate_value(f"{section}.{attribute}", value)
    values[section][attribute] = value


def parse_config(text: str) -> ScenarioConfig:
    """
    Parse and validate a scenario file.

    Args:
        text: INI text with [grid], [states], [gauge], [derivatives], [run]

    Returns:
        The validated configuration with defaults filled in

    Raises:
        ConfigurationError: With ``line`` for syntax errors or ``key_path``
            for unknown keys and invalid values
    """
    parser = _read(text)
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigurationError(f"Unknown section [{section}]", key_path=section)
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"Unknown key '{key}' in [{section}]", key_path=f"{section}.{key}")

    values: Dict[str, Dict[str, Any]] = {section: {} for section in SCHEMA}
    kind = ScenarioKind.POST_LOCALIZED
    if parser.has_option("run", "kind"):
        _apply(values, "run", "kind", parser["run"]["kind"])
        kind = values["run"]["kind"]
    for section, presets in KIND_DEFAULTS[kind].items():
        for key, raw in presets.items():
            _apply(values, section, key, raw)
    for section in parser.sections():
        for key, raw in parser[section].items():
            _apply(values, section, key, raw)

    config = ScenarioConfig(**{section: _SETTINGS[section](**values[section]) for section in SCHEMA})
    _check_consistency(config)
    logger.debug(f"Parsed {kind.value} scenario")
    return config


def _check_consistency(cfg: ScenarioConfig) -> None:
    grid = cfg.grid
    if grid.x_max <= grid.x_min:
        raise ConfigurationError("x_max must exceed x_min", key_path="grid.x_max_nm")
    if grid.is_2d and (grid.y_min is None or grid.y_max is None or grid.y_max <= grid.y_min):
        raise ConfigurationError("2D grids need y_min < y_max", key_path="grid.y_max_nm")
    kind = cfg.run.kind
    if kind is ScenarioKind.BFIELD and not grid.is_2d:
        raise ConfigurationError("The bfield scenario needs a 2D grid (set dy_nm)", key_path="grid.dy_nm")
    if kind is not ScenarioKind.BFIELD and grid.is_2d:
        raise ConfigurationError(f"The {kind.value} scenario runs on a 1D grid", key_path="grid.dy_nm")
    if kind is ScenarioKind.CUSTOM and cfg.states.pre == "field" and cfg.states.pre_field is None:
        raise ConfigurationError("Custom scenarios need states.pre_field", key_path="states.pre_field")
    if kind is ScenarioKind.EFIELD and cfg.run.reading_interval * (cfg.run.readings - 1) > cfg.run.duration:
        raise ConfigurationError("Readings do not fit in the run duration", key_path="run.readings")
    if kind is ScenarioKind.BFIELD and cfg.run.reading_interval * (cfg.run.readings - 1) > cfg.run.duration:
        raise ConfigurationError("Readings do not fit in the run duration", key_path="run.readings")


def load_config(path: Path) -> ScenarioConfig:
    """Read and parse a scenario file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"Failed to read configuration {path}: {e}")
        raise ConfigurationError(f"Failed to read configuration: {e}", key_path=str(path))
    logger.info(f"Configuration loaded from {path}")
    return parse_config(text)
