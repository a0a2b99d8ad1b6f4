"""
Physical operators acting on grid fields.

Operators are applied gauge-covariantly: derivatives are taken as
exp(iqPhi/hbar) d/dx exp(-iqPhi/hbar), with Phi the line integral of the
vector potential held by the scenario. Operators built only from such
derivatives and from gauge-independent multipliers therefore transform as
G O G^dagger, the others pick up explicit gauge terms.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..constants import CHARGE, EFFECTIVE_MASS, HBAR
from ..utils.exceptions import ContextRequired, GaugeMixing, OperatorError, UnsupportedOperator
from .fields import WaveField, gradient, second_diff
from .gauge import EmScenario, GaugeFunction, apply_gauge, gauge_phase

logger = logging.getLogger("weak_gauge_lab.core.operators")

# Relative residual below which an operator is taken to transform as G O G^dagger.
GAUGE_RESIDUAL_TOLERANCE = 1e-6
COMMUTATOR_TOLERANCE = 1e-6


class OperatorKind(Enum):
    IDENTITY = "identity"
    POSITION = "position"
    POSITION_Y = "position-y"
    CANONICAL_MOMENTUM = "canonical-momentum"
    VELOCITY = "velocity"
    VELOCITY_Y = "velocity-y"
    KINETIC_ENERGY = "kinetic-energy"
    HAMILTONIAN = "hamiltonian"
    POSITION_PROJECTOR = "position-projector"
    MOMENTUM_PROJECTOR = "momentum-projector"
    VELOCITY_PROJECTOR = "velocity-projector"
    SCALAR_POTENTIAL = "scalar-potential"
    VECTOR_POTENTIAL = "vector-potential"
    ELECTRIC_FIELD = "electric-field"
    MAGNETIC_FIELD = "magnetic-field"


class GaugeClass(Enum):
    SATISFIES = "satisfies"
    VIOLATES = "violates"


_NEEDS_EM = {
    OperatorKind.VELOCITY,
    OperatorKind.VELOCITY_Y,
    OperatorKind.KINETIC_ENERGY,
    OperatorKind.HAMILTONIAN,
    OperatorKind.VELOCITY_PROJECTOR,
    OperatorKind.SCALAR_POTENTIAL,
    OperatorKind.VECTOR_POTENTIAL,
    OperatorKind.ELECTRIC_FIELD,
    OperatorKind.MAGNETIC_FIELD,
}

_PARAMETRIZED = {
    OperatorKind.POSITION_PROJECTOR,
    OperatorKind.MOMENTUM_PROJECTOR,
    OperatorKind.VELOCITY_PROJECTOR,
}

_GAUGE_TABLE = {
    OperatorKind.IDENTITY: GaugeClass.SATISFIES,
    OperatorKind.POSITION: GaugeClass.SATISFIES,
    OperatorKind.POSITION_Y: GaugeClass.SATISFIES,
    OperatorKind.CANONICAL_MOMENTUM: GaugeClass.VIOLATES,
    OperatorKind.VELOCITY: GaugeClass.SATISFIES,
    OperatorKind.VELOCITY_Y: GaugeClass.SATISFIES,
    OperatorKind.KINETIC_ENERGY: GaugeClass.SATISFIES,
    OperatorKind.HAMILTONIAN: GaugeClass.VIOLATES,
    OperatorKind.POSITION_PROJECTOR: GaugeClass.SATISFIES,
    OperatorKind.MOMENTUM_PROJECTOR: GaugeClass.VIOLATES,
    OperatorKind.VELOCITY_PROJECTOR: GaugeClass.SATISFIES,
    OperatorKind.SCALAR_POTENTIAL: GaugeClass.VIOLATES,
    OperatorKind.VECTOR_POTENTIAL: GaugeClass.VIOLATES,
    OperatorKind.ELECTRIC_FIELD: GaugeClass.SATISFIES,
    OperatorKind.MAGNETIC_FIELD: GaugeClass.SATISFIES,
}


@dataclass(frozen=True)
class OperatorSpec:
    """
    An operator kind plus its eigenvalue parameter for projectors.

    ``parameter`` is x0 (m) for position projectors, p0 (kg*m/s) for momentum
    projectors and v0 (m/s) for velocity projectors.
    """
    kind: OperatorKind
    parameter: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind in _PARAMETRIZED and self.parameter is None:
            raise OperatorError(f"{self.kind.value} needs an eigenvalue parameter")
        if self.kind not in _PARAMETRIZED and self.parameter is not None:
            raise OperatorError(f"{self.kind.value} takes no parameter")

    @classmethod
    def from_name(cls, name: str, parameter: Optional[float] = None) -> "OperatorSpec":
        try:
            kind = OperatorKind(name.strip().lower())
        except ValueError:
            raise UnsupportedOperator(
                f"Unknown operator '{name}'", details=f"known: {[k.value for k in OperatorKind]}"
            )
        return cls(kind, parameter)

    @classmethod
    def position_projector(cls, x0: float) -> "OperatorSpec":
        return cls(OperatorKind.POSITION_PROJECTOR, x0)

    @classmethod
    def momentum_projector(cls, p0: float) -> "OperatorSpec":
        return cls(OperatorKind.MOMENTUM_PROJECTOR, p0)

    @classmethod
    def velocity_projector(cls, v0: float) -> "OperatorSpec":
        return cls(OperatorKind.VELOCITY_PROJECTOR, v0)

    @property
    def name(self) -> str:
        if self.parameter is None:
            return self.kind.value
        return f"{self.kind.value}({self.parameter:.6g})"

    @property
    def needs_em(self) -> bool:
        return self.kind in _NEEDS_EM

    def is_time_dependent(self, em: Optional[EmScenario]) -> bool:
        """Whether dO/dt can be nonzero in this electromagnetic context."""
        if em is None or em.is_static:
            return False
        return self.kind in {
            OperatorKind.VELOCITY,
            OperatorKind.KINETIC_ENERGY,
            OperatorKind.HAMILTONIAN,
            OperatorKind.VELOCITY_PROJECTOR,
            OperatorKind.SCALAR_POTENTIAL,
            OperatorKind.VECTOR_POTENTIAL,
        }


IDENTITY = OperatorSpec(OperatorKind.IDENTITY)
POSITION = OperatorSpec(OperatorKind.POSITION)
POSITION_Y = OperatorSpec(OperatorKind.POSITION_Y)
MOMENTUM = OperatorSpec(OperatorKind.CANONICAL_MOMENTUM)
VELOCITY = OperatorSpec(OperatorKind.VELOCITY)
VELOCITY_Y = OperatorSpec(OperatorKind.VELOCITY_Y)
KINETIC_ENERGY = OperatorSpec(OperatorKind.KINETIC_ENERGY)
HAMILTONIAN = OperatorSpec(OperatorKind.HAMILTONIAN)


@dataclass(frozen=True)
class HeisenbergOp:
    """C = (i/hbar)[H, O] + dO/dt, the operator whose expectation is d<O>/dt."""
    base: OperatorSpec

    @property
    def name(self) -> str:
        return f"d/dt[{self.base.name}]"

    @property
    def needs_em(self) -> bool:
        return True


Observable = Union[OperatorSpec, HeisenbergOp]


def _check_context(kind_name: str, needs_em: bool, psi: WaveField, em: Optional[EmScenario]) -> None:
    if em is None:
        if needs_em:
            raise ContextRequired(f"Operator {kind_name} needs an electromagnetic scenario")
        return
    if em.gauge_tag != psi.gauge_tag:
        raise GaugeMixing(
            f"Operator {kind_name} evaluated with potentials of another gauge",
            details=f"field={psi.gauge_tag!r}, potentials={em.gauge_tag!r}",
        )


def _connection(psi: WaveField, em: Optional[EmScenario], axis: int) -> Optional[np.ndarray]:
    """exp(iq*Phi/hbar) along ``axis`` or None when the connection vanishes."""
    if em is None or not em.has_connection(axis):
        return None
    phi = em.connection_phase(psi.grid.coords(), psi.t, axis)
    return np.exp(1j * CHARGE * phi / HBAR)


def covariant_gradient(data: np.ndarray, psi: WaveField, em: Optional[EmScenario], axis: int = 0) -> np.ndarray:
    """(d/dx_axis - i q A_axis/hbar) applied to ``data`` living on psi's grid."""
    spacing = psi.grid.spacings[axis]
    link = _connection(psi, em, axis)
    if link is None:
        return gradient(data, spacing, axis)
    return link * gradient(np.conj(link) * data, spacing, axis)


def covariant_second_diff(data: np.ndarray, psi: WaveField, em: Optional[EmScenario], axis: int = 0) -> np.ndarray:
    """Square of the covariant derivative on the compact three-point stencil."""
    spacing = psi.grid.spacings[axis]
    link = _connection(psi, em, axis)
    if link is None:
        return second_diff(data, spacing, axis)
    return link * second_diff(np.conj(link) * data, spacing, axis)


def _require_2d(kind: OperatorKind, psi: WaveField) -> None:
    if psi.grid.ndim < 2:
        raise UnsupportedOperator(f"{kind.value} needs a 2D grid")


def _require_1d(kind: OperatorKind, psi: WaveField) -> None:
    if psi.grid.ndim != 1:
        raise UnsupportedOperator(f"{kind.value} is only implemented on 1D grids")


def _velocity(data: np.ndarray, psi: WaveField, em: Optional[EmScenario], axis: int) -> np.ndarray:
    return -1j * HBAR / EFFECTIVE_MASS * covariant_gradient(data, psi, em, axis)


def _kinetic(data: np.ndarray, psi: WaveField, em: Optional[EmScenario]) -> np.ndarray:
    total = np.zeros_like(data, dtype=complex)
    for axis in range(psi.grid.ndim):
        total += _velocity(_velocity(data, psi, em, axis), psi, em, axis)
    return 0.5 * EFFECTIVE_MASS * total


def _hamiltonian(data: np.ndarray, psi: WaveField, em: EmScenario) -> np.ndarray:
    kinetic = np.zeros_like(data, dtype=complex)
    for axis in range(psi.grid.ndim):
        kinetic += covariant_second_diff(data, psi, em, axis)
    potential = em.scalar_potential(psi.grid.coords(), psi.t)
    return -(HBAR**2) / (2.0 * EFFECTIVE_MASS) * kinetic + CHARGE * potential * data


def _plane_wave_projection(data: np.ndarray, psi: WaveField, p0: float) -> np.ndarray:
    x = psi.grid.x
    length = psi.grid.nx * psi.grid.dx
    wave = np.exp(1j * p0 * x / HBAR)
    overlap = np.vdot(wave, data) * psi.grid.dx
    return wave * overlap / length


def _act(op: OperatorSpec, data: np.ndarray, psi: WaveField, em: Optional[EmScenario]) -> np.ndarray:
    kind = op.kind
    coords = psi.grid.coords()
    if kind is OperatorKind.IDENTITY:
        return data.astype(complex, copy=True)
    if kind is OperatorKind.POSITION:
        return coords[0] * data
    if kind is OperatorKind.POSITION_Y:
        _require_2d(kind, psi)
        return coords[1] * data
    if kind is OperatorKind.CANONICAL_MOMENTUM:
        return -1j * HBAR * gradient(data, psi.grid.spacings[0], 0)
    if kind is OperatorKind.VELOCITY:
        return _velocity(data, psi, em, 0)
    if kind is OperatorKind.VELOCITY_Y:
        _require_2d(kind, psi)
        return _velocity(data, psi, em, 1)
    if kind is OperatorKind.KINETIC_ENERGY:
        return _kinetic(data, psi, em)
    if kind is OperatorKind.HAMILTONIAN:
        return _hamiltonian(data, psi, em)
    if kind is OperatorKind.POSITION_PROJECTOR:
        axis = psi.grid.x_axis if psi.grid.ndim == 2 else psi.grid
        out = np.zeros_like(data, dtype=complex)
        k = axis.nearest_index(op.parameter)
        out[k] = data[k]
        return out
    if kind is OperatorKind.MOMENTUM_PROJECTOR:
        _require_1d(kind, psi)
        return _plane_wave_projection(data, psi, op.parameter)
    if kind is OperatorKind.VELOCITY_PROJECTOR:
        _require_1d(kind, psi)
        link = _connection(psi, em, 0)
        p0 = EFFECTIVE_MASS * op.parameter
        if link is None:
            return _plane_wave_projection(data, psi, p0)
        return link * _plane_wave_projection(np.conj(link) * data, psi, p0)
    if kind is OperatorKind.SCALAR_POTENTIAL:
        return em.scalar_potential(coords, psi.t) * data
    if kind is OperatorKind.VECTOR_POTENTIAL:
        return em.vector_potential(coords, psi.t, axis=0) * data
    if kind is OperatorKind.ELECTRIC_FIELD:
        return em.electric(coords, psi.t) * data
    if kind is OperatorKind.MAGNETIC_FIELD:
        return em.magnetic(coords, psi.t) * data
    raise UnsupportedOperator(f"No grid action for {kind.value}")


def apply(op: Observable, psi: WaveField, em: Optional[EmScenario] = None) -> np.ndarray:
    """
    Apply an operator to a field.

    Args:
        op: Operator (or Heisenberg derivative operator) to apply
        psi: Field acted on; its gauge tag selects the potentials
        em: Scenario whose potentials are expressed in psi's gauge

    Returns:
        O psi as a non-normalized complex array on psi's grid

    Raises:
        ContextRequired: If the operator needs ``em`` and none was given
        GaugeMixing: If ``em`` and ``psi`` are in different gauges
    """
    if isinstance(op, HeisenbergOp):
        return heisenberg_rhs(op.base, psi, em)
    _check_context(op.name, op.needs_em, psi, em)
    return _act(op, psi.amplitudes, psi, em)


def apply_chain(ops: Sequence[Observable], psi: WaveField, em: Optional[EmScenario] = None) -> np.ndarray:
    """Product O_1 O_2 ... O_n psi; the right-most operator acts first."""
    data = psi.amplitudes
    for op in reversed(ops):
        data = apply(op, psi.with_amplitudes(data), em)
    return data


def time_derivative(op: OperatorSpec, psi: WaveField, em: Optional[EmScenario] = None) -> np.ndarray:
    """
    Explicit time derivative dO/dt applied to psi.

    Only gauge potentials depend on time; the Coulomb potentials of every
    scenario kind are static.
    """
    if not op.is_time_dependent(em):
        return np.zeros(psi.grid.shape, dtype=complex)
    _check_context(op.name, op.needs_em, psi, em)
    coords = psi.grid.coords()
    data = psi.amplitudes
    a_dt = em.vector_potential_dt(coords, psi.t, axis=0)
    kind = op.kind
    if kind is OperatorKind.VELOCITY:
        return -(CHARGE / EFFECTIVE_MASS) * a_dt * data
    if kind in (OperatorKind.KINETIC_ENERGY, OperatorKind.HAMILTONIAN):
        v_data = _velocity(data, psi, em, 0)
        out = -0.5 * CHARGE * (a_dt * v_data + _velocity(a_dt * data, psi, em, 0))
        if kind is OperatorKind.HAMILTONIAN:
            out = out + CHARGE * em.scalar_potential_dt(coords, psi.t) * data
        return out
    if kind is OperatorKind.VECTOR_POTENTIAL:
        return a_dt * data
    if kind is OperatorKind.SCALAR_POTENTIAL:
        return em.scalar_potential_dt(coords, psi.t) * data
    if kind is OperatorKind.VELOCITY_PROJECTOR:
        # d/dt of G P G^dagger = (iq/hbar)[dPhi/dt, P_v]
        phi_dt = sum(g.d_t(coords[0], psi.t) for g in em.gauges)
        projected = _act(op, data, psi, em)
        return 1j * CHARGE / HBAR * (phi_dt * projected - _act(op, phi_dt * data, psi, em))
    raise UnsupportedOperator(f"No time derivative for {kind.value}")


def heisenberg_rhs(op: OperatorSpec, psi: WaveField, em: Optional[EmScenario]) -> np.ndarray:
    """
    Grid realization of C psi = (i/hbar)(H(O psi) - O(H psi)) + (dO/dt) psi.

    Raises:
        ContextRequired: If ``em`` is missing
    """
    if em is None:
        raise ContextRequired(f"d/dt[{op.name}] needs an electromagnetic scenario")
    commutator = apply_chain((HAMILTONIAN, op), psi, em) - apply_chain((op, HAMILTONIAN), psi, em)
    return 1j / HBAR * commutator + time_derivative(op, psi, em)


def gauge_class(op: OperatorSpec) -> GaugeClass:
    """Whether O^g = G O G^dagger holds for this operator kind."""
    return _GAUGE_TABLE[op.kind]


def _field_norm(data: np.ndarray, psi: WaveField) -> float:
    return float(np.sqrt(np.sum(np.abs(data) ** 2) * psi.grid.cell))


def gauge_residual(op: OperatorSpec, psi: WaveField, em: EmScenario, gauge: GaugeFunction) -> float:
    """
    Relative failure of O^g psi^g = G (O psi).

    Args:
        op: Operator under test
        psi: Coulomb-gauge probe field
        em: Coulomb-gauge scenario
        gauge: Gauge function used for the transformation

    Returns:
        ||O^g psi^g - G O psi|| relative to the larger of ||O psi|| and ||O^g psi^g||
    """
    plain = apply(op, psi, em)
    transformed = apply(op, apply_gauge(psi, gauge), em.transformed(gauge))
    expected = gauge_phase(gauge, psi) * plain
    scale = max(_field_norm(plain, psi), _field_norm(transformed, psi))
    if scale == 0.0:
        scale = 1.0
    return _field_norm(transformed - expected, psi) / scale


def classify_numerically(
    op: OperatorSpec, psi: WaveField, em: EmScenario, gauge: GaugeFunction
) -> Tuple[GaugeClass, float]:
    residual = gauge_residual(op, psi, em, gauge)
    verdict = GaugeClass.SATISFIES if residual < GAUGE_RESIDUAL_TOLERANCE else GaugeClass.VIOLATES
    logger.debug(f"{op.name}: gauge residual {residual:.3e} -> {verdict.value}")
    return verdict, residual


def commutes(
    op_a: OperatorSpec, op_b: OperatorSpec, probe: WaveField, em: Optional[EmScenario] = None
) -> Tuple[bool, float]:
    """
    Test [A, B] = 0 on a probe state.

    The threshold scales with ||A probe|| * ||B probe|| / ||probe||^2.

    Returns:
        (commutes, ||(AB - BA) probe|| / ||probe||)
    """
    size = _field_norm(probe.amplitudes, probe)
    residual = _field_norm(
        apply_chain((op_a, op_b), probe, em) - apply_chain((op_b, op_a), probe, em), probe
    ) / size
    scale = (_field_norm(apply(op_a, probe, em), probe) / size) * (_field_norm(apply(op_b, probe, em), probe) / size)
    return bool(residual <= COMMUTATOR_TOLERANCE * scale), residual
