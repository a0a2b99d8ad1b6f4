"""
Gauge functions, electromagnetic scenarios and gauge transformations.

A scenario is stored as its Coulomb-gauge potentials plus an ordered tuple of
gauge functions that re-express them: A -> A + grad g, A_s -> A_s - dg/dt.
The physical fields E and B are derived from the analytic partial
derivatives of whatever potentials the scenario currently holds.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..constants import CHARGE, DEFAULT_THETA_COUNT, GAUGE_AMPLITUDE, GAUGE_FREQUENCY, GAUGE_WAVENUMBER, HBAR
from ..utils.exceptions import ConfigurationError, GaugeMixing, GridError
from .fields import WaveField

logger = logging.getLogger("weak_gauge_lab.core.gauge")


@runtime_checkable
class GaugeFunction(Protocol):
    """A real gauge function g(x, t) with the analytic derivatives the lab needs."""

    @property
    def tag(self) -> str: ...

    def value(self, x: np.ndarray, t: float) -> np.ndarray: ...

    def d_x(self, x: np.ndarray, t: float) -> np.ndarray: ...

    def d_xx(self, x: np.ndarray, t: float) -> np.ndarray: ...

    def d_t(self, x: np.ndarray, t: float) -> np.ndarray: ...

    def d_xt(self, x: np.ndarray, t: float) -> np.ndarray: ...

    def d_tt(self, x: np.ndarray, t: float) -> np.ndarray: ...

    def negated(self) -> "GaugeFunction": ...


@dataclass(frozen=True)
class GaugeSpec:
    """Cosine gauge g(x, t) = g0*cos(kg*x + wg*t + theta)."""
    g0: float = GAUGE_AMPLITUDE
    kg: float = GAUGE_WAVENUMBER
    wg: float = GAUGE_FREQUENCY
    theta: float = 0.0

    @property
    def tag(self) -> str:
        return f"cos(g0={self.g0:.9g},kg={self.kg:.9g},wg={self.wg:.9g},theta={self.theta:.12g})"

    def _phase(self, x: np.ndarray, t: float) -> np.ndarray:
        return self.kg * np.asarray(x) + self.wg * t + self.theta

    def value(self, x: np.ndarray, t: float) -> np.ndarray:
        return self.g0 * np.cos(self._phase(x, t))

    def d_x(self, x: np.ndarray, t: float) -> np.ndarray:
        return -self.g0 * self.kg * np.sin(self._phase(x, t))

    def d_xx(self, x: np.ndarray, t: float) -> np.ndarray:
        return -self.g0 * self.kg**2 * np.cos(self._phase(x, t))

    def d_t(self, x: np.ndarray, t: float) -> np.ndarray:
        return -self.g0 * self.wg * np.sin(self._phase(x, t))

    def d_xt(self, x: np.ndarray, t: float) -> np.ndarray:
        return -self.g0 * self.kg * self.wg * np.cos(self._phase(x, t))

    def d_tt(self, x: np.ndarray, t: float) -> np.ndarray:
        return -self.g0 * self.wg**2 * np.cos(self._phase(x, t))

    def stencil_terms(self, x: np.ndarray, t: float) -> Tuple[np.ndarray, ...]:
        """(g, g_x, g_xx, g_t) sharing one evaluation of cos and sin."""
        phase = self._phase(x, t)
        c, s = np.cos(phase), np.sin(phase)
        return (
            self.g0 * c,
            -self.g0 * self.kg * s,
            -self.g0 * self.kg**2 * c,
            -self.g0 * self.wg * s,
        )

    def negated(self) -> "GaugeSpec":
        return GaugeSpec(-self.g0, self.kg, self.wg, self.theta)


@dataclass(frozen=True, eq=False)
class TabulatedGauge:
    """
    Gauge function sampled on a (t, x) mesh.

    The caller supplies g together with g_x, g_xx and g_t tables; mixed and
    second time derivatives are derived from the g_t table.
    """
    name: str
    t_nodes: np.ndarray
    x_nodes: np.ndarray
    g: np.ndarray
    g_x: np.ndarray
    g_xx: np.ndarray
    g_t: np.ndarray
    _interpolators: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        shape = (len(self.t_nodes), len(self.x_nodes))
        if len(self.t_nodes) < 2 or len(self.x_nodes) < 2:
            raise ConfigurationError("Tabulated gauge needs at least two nodes per axis", key_path="gauge.table")
        for label in ("g", "g_x", "g_xx", "g_t"):
            table = np.asarray(getattr(self, label), dtype=float)
            if table.shape != shape:
                raise ConfigurationError(
                    f"Table '{label}' has shape {table.shape}, expected {shape}", key_path="gauge.table"
                )
            object.__setattr__(self, label, table)
        tables = {
            "g": self.g,
            "g_x": self.g_x,
            "g_xx": self.g_xx,
            "g_t": self.g_t,
            "g_xt": np.gradient(self.g_t, self.x_nodes, axis=1),
            "g_tt": np.gradient(self.g_t, self.t_nodes, axis=0),
        }
        for label, table in tables.items():
            self._interpolators[label] = RegularGridInterpolator(
                (self.t_nodes, self.x_nodes), table, bounds_error=False, fill_value=None
            )

    @classmethod
    def from_npz(cls, path: Path) -> "TabulatedGauge":
        """Load arrays t, x, g, g_x, g_xx, g_t (SI units) from an .npz file."""
        try:
            data = np.load(path)
            return cls(
                name=Path(path).stem,
                t_nodes=data["t"],
                x_nodes=data["x"],
                g=data["g"],
                g_x=data["g_x"],
                g_xx=data["g_xx"],
                g_t=data["g_t"],
            )
        except ConfigurationError:
            raise
        except Exception as e:
            logger.error(f"Failed to load tabulated gauge {path}: {e}")
            raise ConfigurationError(f"Failed to load tabulated gauge: {e}", key_path="gauge.table")

    @property
    def tag(self) -> str:
        return f"table({self.name})"

    def _eval(self, label: str, x: np.ndarray, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        points = np.stack([np.full(x.shape, t), x], axis=-1)
        return self._interpolators[label](points)

    def value(self, x: np.ndarray, t: float) -> np.ndarray:
        return self._eval("g", x, t)

    def d_x(self, x: np.ndarray, t: float) -> np.ndarray:
        return self._eval("g_x", x, t)

    def d_xx(self, x: np.ndarray, t: float) -> np.ndarray:
        return self._eval("g_xx", x, t)

    def d_t(self, x: np.ndarray, t: float) -> np.ndarray:
        return self._eval("g_t", x, t)

    def d_xt(self, x: np.ndarray, t: float) -> np.ndarray:
        return self._eval("g_xt", x, t)

    def d_tt(self, x: np.ndarray, t: float) -> np.ndarray:
        return self._eval("g_tt", x, t)

    def stencil_terms(self, x: np.ndarray, t: float) -> Tuple[np.ndarray, ...]:
        return self.value(x, t), self.d_x(x, t), self.d_xx(x, t), self.d_t(x, t)

    def negated(self) -> "TabulatedGauge":
        return TabulatedGauge(
            f"-{self.name}", self.t_nodes, self.x_nodes, -self.g, -self.g_x, -self.g_xx, -self.g_t
        )


def derivative_consistency(gauge: GaugeFunction, x: np.ndarray, t: float, h_x: float, h_t: float) -> float:
    """
    Largest relative mismatch between the analytic derivatives and central differences.

    Args:
        gauge: Gauge function to check
        x: Sample positions
        t: Sample time
        h_x: Spatial difference step
        h_t: Temporal difference step

    Returns:
        Maximum relative error over g_x, g_xx and g_t
    """
    fd_x = (gauge.value(x + h_x, t) - gauge.value(x - h_x, t)) / (2 * h_x)
    fd_xx = (gauge.d_x(x + h_x, t) - gauge.d_x(x - h_x, t)) / (2 * h_x)
    fd_t = (gauge.value(x, t + h_t) - gauge.value(x, t - h_t)) / (2 * h_t)
    worst = 0.0
    for analytic, numeric in ((gauge.d_x(x, t), fd_x), (gauge.d_xx(x, t), fd_xx), (gauge.d_t(x, t), fd_t)):
        scale = np.max(np.abs(analytic))
        if scale > 0:
            worst = max(worst, float(np.max(np.abs(analytic - numeric)) / scale))
    return worst


class ScenarioKind(Enum):
    """Coulomb-gauge field configurations the lab knows how to build."""
    FREE = "free"
    UNIFORM_E = "uniform-E"
    LANDAU_B = "landau-B"


@dataclass(frozen=True)
class EmScenario:
    """
    Electromagnetic context of the Hamiltonian.

    Coulomb potentials by kind: free (A = 0, A_s = 0), uniform-E along x
    (A = 0, A_s = -E*x) and landau-B along z in the Landau gauge
    (A = (0, B*x, 0), A_s = 0). ``gauges`` re-expresses them.
    """
    kind: ScenarioKind = ScenarioKind.FREE
    electric_field: float = 0.0
    magnetic_field: float = 0.0
    gauges: Tuple[GaugeFunction, ...] = ()

    @classmethod
    def free(cls) -> "EmScenario":
        return cls(ScenarioKind.FREE)

    @classmethod
    def uniform_electric(cls, electric_field: float) -> "EmScenario":
        return cls(ScenarioKind.UNIFORM_E, electric_field=electric_field)

    @classmethod
    def landau(cls, magnetic_field: float) -> "EmScenario":
        return cls(ScenarioKind.LANDAU_B, magnetic_field=magnetic_field)

    @property
    def gauge_tag(self) -> Optional[str]:
        if not self.gauges:
            return None
        return "+".join(g.tag for g in self.gauges)

    @property
    def coulomb(self) -> "EmScenario":
        return EmScenario(self.kind, self.electric_field, self.magnetic_field)

    @property
    def is_static(self) -> bool:
        return not self.gauges

    def transformed(self, gauge: GaugeFunction) -> "EmScenario":
        return EmScenario(self.kind, self.electric_field, self.magnetic_field, self.gauges + (gauge,))

    def has_connection(self, axis: int) -> bool:
        """Whether the vector potential along ``axis`` can be nonzero."""
        if axis == 0:
            return bool(self.gauges)
        return self.kind is ScenarioKind.LANDAU_B

    def _require_axis(self, coords: Sequence[np.ndarray], axis: int) -> None:
        if axis >= len(coords):
            raise GridError(f"Axis {axis} not available on a {len(coords)}D grid")
        if self.kind is ScenarioKind.LANDAU_B and len(coords) < 2:
            raise GridError("The Landau scenario lives on a 2D grid")

    def vector_potential(self, coords: Sequence[np.ndarray], t: float, axis: int = 0) -> np.ndarray:
        """Component ``axis`` of A (T*m)."""
        self._require_axis(coords, axis)
        x = coords[0]
        total = np.zeros(np.broadcast_shapes(*(np.shape(c) for c in coords)))
        if axis == 0:
            for g in self.gauges:
                total = total + g.d_x(x, t)
        elif self.kind is ScenarioKind.LANDAU_B:
            total = total + self.magnetic_field * x
        return total

    def vector_potential_dt(self, coords: Sequence[np.ndarray], t: float, axis: int = 0) -> np.ndarray:
        """Partial time derivative of component ``axis`` of A."""
        self._require_axis(coords, axis)
        total = np.zeros(np.broadcast_shapes(*(np.shape(c) for c in coords)))
        if axis == 0:
            for g in self.gauges:
                total = total + g.d_xt(coords[0], t)
        return total

    def scalar_potential(self, coords: Sequence[np.ndarray], t: float) -> np.ndarray:
        """Scalar potential A_s (V)."""
        x = coords[0]
        total = np.zeros(np.broadcast_shapes(*(np.shape(c) for c in coords)))
        if self.kind is ScenarioKind.UNIFORM_E:
            total = total - self.electric_field * x
        for g in self.gauges:
            total = total - g.d_t(x, t)
        return total

    def scalar_potential_dt(self, coords: Sequence[np.ndarray], t: float) -> np.ndarray:
        total = np.zeros(np.broadcast_shapes(*(np.shape(c) for c in coords)))
        for g in self.gauges:
            total = total - g.d_tt(coords[0], t)
        return total

    def scalar_potential_dx(self, coords: Sequence[np.ndarray], t: float) -> np.ndarray:
        total = np.zeros(np.broadcast_shapes(*(np.shape(c) for c in coords)))
        if self.kind is ScenarioKind.UNIFORM_E:
            total = total - self.electric_field
        for g in self.gauges:
            total = total - g.d_xt(coords[0], t)
        return total

    def electric(self, coords: Sequence[np.ndarray], t: float) -> np.ndarray:
        """E_x = -dA_s/dx - dA_x/dt from the potentials held by this scenario."""
        return -self.scalar_potential_dx(coords, t) - self.vector_potential_dt(coords, t, axis=0)

    def magnetic(self, coords: Sequence[np.ndarray], t: float) -> np.ndarray:
        """B_z = dA_y/dx - dA_x/dy; gauge terms cancel because g depends on x alone."""
        shape = np.broadcast_shapes(*(np.shape(c) for c in coords))
        total = np.zeros(shape)
        if self.kind is ScenarioKind.LANDAU_B:
            total = total + self.magnetic_field
        return total

    def connection_phase(self, coords: Sequence[np.ndarray], t: float, axis: int) -> np.ndarray:
        """
        Line integral of A along ``axis``, used for covariant differences.

        Axis 0 collects the gauge functions (the Coulomb A_x vanishes for every
        kind); axis 1 is B*x*y in the Landau gauge.
        """
        self._require_axis(coords, axis)
        shape = np.broadcast_shapes(*(np.shape(c) for c in coords))
        total = np.zeros(shape)
        if axis == 0:
            for g in self.gauges:
                total = total + g.value(coords[0], t)
        elif self.kind is ScenarioKind.LANDAU_B:
            total = total + self.magnetic_field * coords[0] * coords[1]
        return total

    def describe(self) -> str:
        parts = [self.kind.value]
        if self.kind is ScenarioKind.UNIFORM_E:
            parts.append(f"E={self.electric_field:.6g} V/m")
        if self.kind is ScenarioKind.LANDAU_B:
            parts.append(f"B={self.magnetic_field:.6g} T")
        if self.gauges:
            parts.append(f"gauge={self.gauge_tag}")
        return ", ".join(parts)


def _gauge_coordinate(psi: WaveField) -> np.ndarray:
    return psi.grid.coords()[0]


def gauge_phase(gauge: GaugeFunction, psi: WaveField, t: Optional[float] = None) -> np.ndarray:
    """exp(i q g(x, t)/hbar) broadcast over the field's grid."""
    when = psi.t if t is None else t
    return np.exp(1j * CHARGE * gauge.value(_gauge_coordinate(psi), when) / HBAR)


def apply_gauge(psi: WaveField, gauge: GaugeFunction, inverse: bool = False) -> WaveField:
    """
    Re-express a field in another gauge.

    Args:
        psi: Field to transform (Coulomb for the forward direction)
        gauge: Gauge function g
        inverse: Strip the phase of ``gauge`` instead of applying it

    Returns:
        psi^g = exp(i q g/hbar) psi (or the inverse) at psi.t

    Raises:
        GaugeMixing: If the field is not in the expected source gauge
    """
    if inverse:
        if psi.gauge_tag != gauge.tag:
            raise GaugeMixing(
                "Cannot strip a gauge the field is not expressed in",
                details=f"field={psi.gauge_tag!r}, requested={gauge.tag!r}",
            )
        data = psi.amplitudes * np.conj(gauge_phase(gauge, psi))
        return WaveField(psi.grid, data, psi.t, None)
    if psi.gauge is not None:
        raise GaugeMixing(
            "Field is already gauge transformed; invert it first",
            details=f"field={psi.gauge_tag!r}, requested={gauge.tag!r}",
        )
    return WaveField(psi.grid, psi.amplitudes * gauge_phase(gauge, psi), psi.t, gauge)


def transform_potentials(em: EmScenario, gauge: GaugeFunction) -> EmScenario:
    """A^g = A + grad g, A_s^g = A_s - dg/dt; E and B are unchanged."""
    return em.transformed(gauge)


def theta_sweep(thetas: Sequence[float]) -> List[GaugeSpec]:
    """One cosine gauge per phase with the reference amplitude, wavenumber and frequency."""
    return [GaugeSpec(GAUGE_AMPLITUDE, GAUGE_WAVENUMBER, GAUGE_FREQUENCY, float(theta)) for theta in thetas]


def default_thetas(count: int = DEFAULT_THETA_COUNT) -> List[float]:
    """``count`` equally spaced phases in [0, 2*pi)."""
    if count < 1:
        raise ConfigurationError("theta count must be >= 1", key_path="gauge.theta_count")
    return [2.0 * math.pi * k / count for k in range(count)]


def theta_spread(values: Sequence[float]) -> float:
    """Spread of a per-theta series, reported as max - min."""
    return float(np.max(values) - np.min(values))
