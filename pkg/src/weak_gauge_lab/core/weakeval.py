"""
Weak values and their time derivatives.

A weak value is Re/Im of <f|U(t_L) O U(t_R)|psi> / <f|U(t_L) U(t_R)|psi>.
The pre-selected state is prepared at t0, the post-selected state is
instantiated at its own time t0 + t_R + t_L and is never evolved.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Dict, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from ..constants import CHARGE, DENOMINATOR_FLOOR, HBAR
from ..utils.exceptions import GaugeMixing, GridError, UnsupportedOperator
from .bohmian import bohm_velocity
from .fields import Grid1D, WaveField, inner, interpolation_weights, norm
from .gauge import EmScenario, GaugeFunction, apply_gauge
from .operators import (
    HAMILTONIAN,
    POSITION,
    VELOCITY,
    HeisenbergOp,
    Observable,
    OperatorSpec,
    apply,
    apply_chain,
    gauge_class,
    GaugeClass,
    time_derivative,
)
from .propagator import GaugedScheme, LandauState, Preparation, StatePair, Stepper
from .states import PacketParams, gaussian_field

logger = logging.getLogger("weak_gauge_lab.core.weakeval")

# Imaginary part of <psi|O|psi> tolerated for operators that should be Hermitian.
HERMITIAN_RESIDUE = 1e-8


@dataclass(frozen=True)
class WeakValueSample:
    """One weak value; ``value.real`` is W and ``value.imag`` is W_i."""
    observable: str
    t_l: float
    t_r: float
    value: complex
    denom_mag: float
    flagged: bool

    @property
    def real(self) -> float:
        return float(self.value.real)

    @property
    def imag(self) -> float:
        return float(self.value.imag)


@dataclass(frozen=True)
class DerivativeEstimate:
    """A finite-difference or theoretical derivative with its health flag."""
    value: float
    stride: float
    flagged: bool
    samples: Tuple[WeakValueSample, ...] = ()


@dataclass(frozen=True)
class TheoryDerivative:
    """LHD or RHD: full value and the W(C) term alone."""
    value: float
    c_term: float
    flagged: bool


@dataclass(frozen=True)
class ConvergenceReport:
    full: DerivativeEstimate
    half: DerivativeEstimate

    @property
    def relative_change(self) -> float:
        scale = abs(self.full.value)
        if scale == 0.0:
            return abs(self.half.value)
        return abs(self.half.value - self.full.value) / scale


class Bra(Protocol):
    """A post-selected state at a fixed instant, ready for overlaps."""

    def overlap(self, chi: WaveField) -> complex: ...

    def magnitude(self, psi: WaveField) -> float: ...


@dataclass(frozen=True)
class FieldBra:
    field: WaveField

    def overlap(self, chi: WaveField) -> complex:
        return inner(self.field, chi)

    def magnitude(self, psi: WaveField) -> float:
        scale = norm(self.field) * norm(psi)
        return 0.0 if scale == 0.0 else abs(inner(self.field, psi)) / scale


@dataclass(frozen=True)
class PointBra:
    """Grid delta at an off-grid position, read by linear interpolation."""
    position: float
    t: float
    gauge: Optional[GaugeFunction]

    def _value(self, chi: WaveField) -> complex:
        grid = chi.grid
        if grid.ndim != 1:
            raise GridError("Point post-selection on a field needs a 1D grid")
        if not grid.contains(self.position):
            raise GridError(f"Post-selection point {self.position:.6e} m is outside the box")
        k, frac = interpolation_weights(grid, self.position)
        value = (1.0 - frac) * chi.amplitudes[k] + frac * chi.amplitudes[k + 1]
        if self.gauge is not None:
            value *= np.exp(-1j * CHARGE * float(self.gauge.value(np.array([self.position]), self.t)[0]) / HBAR)
        return complex(value)

    def overlap(self, chi: WaveField) -> complex:
        return self._value(chi)

    def magnitude(self, psi: WaveField) -> float:
        peak = float(np.max(np.abs(psi.amplitudes)))
        return 0.0 if peak == 0.0 else abs(self._value(psi)) / peak


class PostSelection(Protocol):
    def bra(self, t: float, grid: Grid1D, gauge: Optional[GaugeFunction]) -> Bra: ...


@dataclass(frozen=True)
class PacketPost:
    """Gaussian post-selection, instantiated with zero elapsed spreading."""
    params: PacketParams

    def bra(self, t: float, grid: Grid1D, gauge: Optional[GaugeFunction]) -> Bra:
        f = gaussian_field(self.params, grid, t)
        return FieldBra(f if gauge is None else apply_gauge(f, gauge))


@dataclass(frozen=True)
class FieldPost:
    """Arbitrary Coulomb-gauge field used as the post-selected state."""
    field: WaveField

    def bra(self, t: float, grid: Grid1D, gauge: Optional[GaugeFunction]) -> Bra:
        if self.field.gauge_tag is not None:
            raise GaugeMixing("FieldPost expects a Coulomb-gauge field")
        f = self.field.with_amplitudes(self.field.amplitudes, t=t)
        return FieldBra(f if gauge is None else apply_gauge(f, gauge))


@dataclass(frozen=True)
class PointPost:
    """
    Position post-selection at ``position`` (x or (x, y)).

    ``shifted`` moves the point, which is how comoving anchors are built.
    """
    position: Tuple[float, ...]

    @classmethod
    def at(cls, *coords: float) -> "PointPost":
        return cls(tuple(float(c) for c in coords))

    def shifted(self, offset: Sequence[float]) -> "PointPost":
        return PointPost(tuple(p + float(o) for p, o in zip(self.position, offset)))

    def bra(self, t: float, grid: Grid1D, gauge: Optional[GaugeFunction]) -> Bra:
        return PointBra(self.position[0], t, gauge)


@dataclass(frozen=True)
class SelectionPair:
    """Pre-selection recipe, post-selection recipe and the scenario they live in."""
    pre: Union[Preparation, LandauState]
    post: PostSelection
    em: EmScenario
    gauge: Optional[GaugeFunction] = None
    scheme: GaugedScheme = GaugedScheme.EXPANDED

    @property
    def t0(self) -> float:
        return self.pre.t0

    @property
    def is_landau(self) -> bool:
        return isinstance(self.pre, LandauState)

    def with_post(self, post: PostSelection) -> "SelectionPair":
        return replace(self, post=post)


def _sample(op: Observable, t_l: float, t_r: float, num: complex, den: complex, mag: float) -> WeakValueSample:
    flagged = bool(mag < DENOMINATOR_FLOOR or den == 0)
    value = complex("nan") if den == 0 else num / den
    return WeakValueSample(op.name, t_l, t_r, value, mag, flagged)


class WeakValueEvaluator:
    """
    Evaluates weak values for one selection pair.

    Evolved copies of the pre-selected state are cached by t_R so the
    different legs of a finite-difference derivative share their history.
    """

    def __init__(self, sel: SelectionPair) -> None:
        self.logger = logging.getLogger("weak_gauge_lab.core.weakeval.WeakValueEvaluator")
        self.sel = sel
        self._pairs: Dict[int, StatePair] = {}
        if not sel.is_landau:
            self.stepper = Stepper(sel.em, sel.gauge, sel.scheme)
            self.applied_stepper = Stepper(sel.em, sel.gauge, sel.scheme, leak_tolerance=None)
            self._pairs[0] = sel.pre.pair(sel.em, sel.gauge)

    @property
    def potentials(self) -> EmScenario:
        return self.stepper.potentials

    @property
    def grid(self) -> Grid1D:
        return self._pairs[0].grid

    def pre_at(self, t_r: float) -> StatePair:
        """Pre-selected pair evolved by t_r (reused from the nearest earlier cache entry)."""
        steps = self.stepper.steps_for(t_r, self.grid)
        if steps not in self._pairs:
            start = max(k for k in self._pairs if k <= steps)
            self._pairs[steps] = self.stepper.evolve(self._pairs[start], (steps - start) * self.grid.dt)
        return self._pairs[steps]

    def bra(self, t_post: float) -> Bra:
        return self.sel.post.bra(t_post, self.grid, self.sel.gauge)

    def propagate_field(self, data: np.ndarray, template: WaveField, duration: float) -> WaveField:
        """U(duration) applied to an arbitrary array living on template's grid."""
        psi = template.with_amplitudes(data)
        if duration == 0:
            return psi
        return self.applied_stepper.evolve(self.applied_stepper.bootstrap(psi), duration).cur

    def sample(self, op: Observable, t_l: float, t_r: float, post: Optional[PostSelection] = None) -> WeakValueSample:
        if self.sel.is_landau:
            return self._landau_sample(op, t_l, t_r, post or self.sel.post)
        pair_r = self.pre_at(t_r)
        psi_r = pair_r.cur
        numerator = self.propagate_field(apply(op, psi_r, self.potentials), psi_r, t_l)
        denominator = pair_r.cur if t_l == 0 else self.stepper.evolve(pair_r, t_l).cur
        t_post = self.sel.t0 + t_r + t_l
        bra = (post or self.sel.post).bra(t_post, self.grid, self.sel.gauge)
        return _sample(op, t_l, t_r, bra.overlap(numerator), bra.overlap(denominator), bra.magnitude(denominator))

    def _landau_sample(self, op: Observable, t_l: float, t_r: float, post: PostSelection) -> WeakValueSample:
        if not isinstance(post, PointPost) or len(post.position) != 2:
            raise UnsupportedOperator("Landau weak values need a 2D point post-selection")
        if isinstance(op, HeisenbergOp):
            raise UnsupportedOperator("Landau weak values support position and velocity operators only")
        x, y = post.position
        t_apply = self.sel.t0 + t_r
        ratio, mag = self.sel.pre.applied_ratio(op, np.array([x]), np.array([y]), t_apply, t_apply + t_l)
        value = complex(ratio[0])
        flagged = bool(mag[0] < DENOMINATOR_FLOOR or not np.isfinite(value))
        return WeakValueSample(op.name, t_l, t_r, value, float(mag[0]), flagged)


def expectation(op: Observable, psi: WaveField, em: Optional[EmScenario] = None) -> float:
    """
    <psi|O|psi> for a normalized field.

    A warning is logged when a gauge-covariant operator leaves an imaginary
    residue above the Hermiticity tolerance.
    """
    value = inner(psi, psi.with_amplitudes(apply(op, psi, em)))
    if isinstance(op, OperatorSpec) and gauge_class(op) is GaugeClass.SATISFIES:
        if abs(value.imag) > HERMITIAN_RESIDUE * max(abs(value.real), 1e-300):
            logger.warning(f"<{op.name}> has imaginary residue {value.imag:.3e} (real {value.real:.3e})")
    return float(value.real)


def weak_value(op: Observable, t_l: float, t_r: float, sel: SelectionPair) -> WeakValueSample:
    """
    Weak value of ``op`` with intervals t_L (after O) and t_R (before O).

    Returns:
        The complex sample, flagged when the denominator collapses
    """
    return WeakValueEvaluator(sel).sample(op, t_l, t_r)


def local_weak_values(
    op: Observable, psi: WaveField, em: Optional[EmScenario], positions: Sequence[float]
) -> Tuple[np.ndarray, np.ndarray]:
    """
    (O psi)(x)/psi(x) at 1D positions, with the denominator health of each.

    Returns:
        (complex ratios, flags)
    """
    applied = psi.with_amplitudes(apply(op, psi, em))
    values = np.empty(len(positions), dtype=complex)
    flags = np.zeros(len(positions), dtype=bool)
    for i, x in enumerate(positions):
        bra = PointBra(float(x), psi.t, psi.gauge)
        den = bra.overlap(psi)
        flags[i] = bra.magnitude(psi) < DENOMINATOR_FLOOR or den == 0
        values[i] = np.nan if den == 0 else bra.overlap(applied) / den
    return values, flags


def _ratio(bra: Bra, chi: WaveField, den: complex) -> complex:
    return bra.overlap(chi) / den


def lhd(op: OperatorSpec, t_r: float, sel: SelectionPair) -> TheoryDerivative:
    """
    Left-hand derivative at the post-selection time.

    W(C, 0, t_R) + Re{(i/hbar)(<f|O H psi_R>/d - <f|O psi_R>/d * <f|H psi_R>/d)}
    with d = <f|psi_R>.
    """
    if sel.is_landau:
        raise UnsupportedOperator("Theoretical derivatives are evaluated on 1D finite-difference scenarios")
    ev = WeakValueEvaluator(sel)
    em = ev.potentials
    psi = ev.pre_at(t_r).cur
    bra = ev.bra(sel.t0 + t_r)
    den = bra.overlap(psi)
    flagged = bra.magnitude(psi) < DENOMINATOR_FLOOR or den == 0
    if den == 0:
        return TheoryDerivative(float("nan"), float("nan"), True)
    a = _ratio(bra, psi.with_amplitudes(apply_chain((op, HAMILTONIAN), psi, em)), den)
    b = _ratio(bra, psi.with_amplitudes(apply(op, psi, em)), den)
    h = _ratio(bra, psi.with_amplitudes(apply(HAMILTONIAN, psi, em)), den)
    c_term = _ratio(bra, psi.with_amplitudes(apply(HeisenbergOp(op), psi, em)), den).real
    value = c_term + (1j / HBAR * (a - b * h)).real
    return TheoryDerivative(float(value), float(c_term), bool(flagged))


def rhd(op: OperatorSpec, t_l: float, sel: SelectionPair) -> TheoryDerivative:
    """
    Right-hand derivative at the pre-selection time.

    W(C, t_L, 0) + Re{(-i/hbar)(<f|U H O psi>/d - <f|U O psi>/d * <f|U H psi>/d)}
    with d = <f|U psi> and U = U(t_L).
    """
    if sel.is_landau:
        raise UnsupportedOperator("Theoretical derivatives are evaluated on 1D finite-difference scenarios")
    ev = WeakValueEvaluator(sel)
    em = ev.potentials
    pair = ev.pre_at(0.0)
    psi = pair.cur
    evolved = pair.cur if t_l == 0 else ev.stepper.evolve(pair, t_l).cur
    bra = ev.bra(sel.t0 + t_l)
    den = bra.overlap(evolved)
    flagged = bra.magnitude(evolved) < DENOMINATOR_FLOOR or den == 0
    if den == 0:
        return TheoryDerivative(float("nan"), float("nan"), True)

    def leg(data: np.ndarray) -> complex:
        return _ratio(bra, ev.propagate_field(data, psi, t_l), den)

    a = leg(apply_chain((HAMILTONIAN, op), psi, em))
    b = leg(apply(op, psi, em))
    h = leg(apply(HAMILTONIAN, psi, em))
    c_term = leg(apply(HeisenbergOp(op), psi, em)).real
    value = c_term + (-1j / HBAR * (a - b * h)).real
    return TheoryDerivative(float(value), float(c_term), bool(flagged))


def fdlhd(op: Observable, t_l: float, t_r: float, sel: SelectionPair) -> DerivativeEstimate:
    """[W(O, 0, t_R) - W(O, t_L, t_R)] / t_L."""
    if t_l <= 0:
        raise GridError("fdlhd needs a positive t_L")
    ev = WeakValueEvaluator(sel)
    w0 = ev.sample(op, 0.0, t_r)
    w1 = ev.sample(op, t_l, t_r)
    return DerivativeEstimate((w0.real - w1.real) / t_l, t_l, w0.flagged or w1.flagged, (w0, w1))


def fdrhd(op: Observable, t_l: float, t_r: float, sel: SelectionPair) -> DerivativeEstimate:
    """[W(O, t_L, t_R) - W(O, t_L, 0)] / t_R."""
    if t_r <= 0:
        raise GridError("fdrhd needs a positive t_R")
    ev = WeakValueEvaluator(sel)
    w1 = ev.sample(op, t_l, t_r)
    w0 = ev.sample(op, t_l, 0.0)
    return DerivativeEstimate((w1.real - w0.real) / t_r, t_r, w0.flagged or w1.flagged, (w0, w1))


def sum_identity(op: OperatorSpec, sel: SelectionPair) -> Tuple[float, float]:
    """
    Both sides of LHD(t_R=0) + RHD(t_L=0) = W(C, 0, 0) + <f|dO/dt|psi>/<f|psi>.
    """
    lhs = lhd(op, 0.0, sel).value + rhd(op, 0.0, sel).value
    ev = WeakValueEvaluator(sel)
    psi = ev.pre_at(0.0).cur
    bra = ev.bra(sel.t0)
    den = bra.overlap(psi)
    w_c = ev.sample(HeisenbergOp(op), 0.0, 0.0)
    explicit = _ratio(bra, psi.with_amplitudes(time_derivative(op, psi, ev.potentials)), den).real
    return float(lhs), float(w_c.real + explicit)


def mixed_second_derivative(
    op: Observable,
    t_l: float,
    t_r: float,
    sel: SelectionPair,
    drift: Optional[Sequence[float]] = None,
) -> DerivativeEstimate:
    """
    t_R-derivative of the FDLHD: [W(0,t_R) - W(t_L,t_R) - W(0,0) + W(t_L,0)] / (t_L t_R).

    With ``drift`` (a velocity per axis) the point post-selection of the t_R
    legs is moved by drift*t_R, so the derivative follows the local flow
    instead of a fixed point.
    """
    if t_l <= 0 or t_r <= 0:
        raise GridError("mixed_second_derivative needs positive t_L and t_R")
    ev = WeakValueEvaluator(sel)
    late_post = sel.post
    if drift is not None:
        if not isinstance(sel.post, PointPost):
            raise UnsupportedOperator("Comoving anchoring needs a point post-selection")
        late_post = sel.post.shifted([v * t_r for v in drift])
    w00 = ev.sample(op, 0.0, 0.0)
    wl0 = ev.sample(op, t_l, 0.0)
    w0r = ev.sample(op, 0.0, t_r, post=late_post)
    wlr = ev.sample(op, t_l, t_r, post=late_post)
    value = (w0r.real - wlr.real - w00.real + wl0.real) / (t_l * t_r)
    flagged = any(s.flagged for s in (w00, wl0, w0r, wlr))
    return DerivativeEstimate(value, t_r, flagged, (w00, wl0, w0r, wlr))


def stride_convergence(
    estimator: Callable[[float], DerivativeEstimate], stride: float, dt: float
) -> ConvergenceReport:
    """Evaluate a derivative at ``stride`` and at half of it (rounded to whole steps)."""
    half_steps = max(1, int(round(stride / dt)) // 2)
    return ConvergenceReport(estimator(stride), estimator(half_steps * dt))


def unraveling_residual(op: OperatorSpec, psi: WaveField, em: Optional[EmScenario] = None) -> float:
    """
    |sum_x |psi(x)|^2 Re W(O | x, psi) dx - <O>| / |<O>| over the grid points.
    """
    applied = apply(op, psi, em)
    density = psi.density
    with np.errstate(divide="ignore", invalid="ignore"):
        local = np.where(density > 0, applied / psi.amplitudes, 0.0)
    unraveled = float(np.sum(density * local.real) * psi.grid.cell)
    direct = expectation(op, psi, em)
    scale = abs(direct) if direct != 0 else 1.0
    return abs(unraveled - direct) / scale


def continuity_residual(
    sp: StatePair, em: EmScenario, gauge: Optional[GaugeFunction] = None, span_steps: int = 10
) -> float:
    """
    Relative mismatch between d<X>/dt and sum |psi|^2 v_B dx.

    The derivative is the forward difference over ``span_steps`` steps,
    compared with the Bohmian-velocity integral at the midpoint.
    """
    if span_steps < 2 or span_steps % 2:
        raise GridError("span_steps must be an even number >= 2")
    stepper = Stepper(em, gauge)
    dt = sp.grid.dt
    mid = stepper.evolve(sp, (span_steps // 2) * dt)
    end = stepper.evolve(mid, (span_steps // 2) * dt)
    x_start = expectation(POSITION, sp.cur)
    x_end = expectation(POSITION, end.cur)
    rate = (x_end - x_start) / (span_steps * dt)
    v_b = bohm_velocity(mid.cur, stepper.potentials)
    flux = float(np.nansum(mid.cur.density * v_b) * mid.grid.cell)
    scale = abs(rate) if rate != 0 else 1.0
    return abs(rate - flux) / scale


def hermiticity_gap(psi: WaveField, phi: WaveField, em: EmScenario) -> float:
    """
    Relative gap between W(V | f=phi, pre=psi) and W(V | f=psi, pre=phi) at t_L = t_R = 0.

    Real parts agree for Hermitian V: Re(<phi|V psi>/<phi|psi>) vs Re(<psi|V phi>/<psi|phi>).
    """
    forward = inner(phi, psi.with_amplitudes(apply(VELOCITY, psi, em))) / inner(phi, psi)
    backward = inner(psi, phi.with_amplitudes(apply(VELOCITY, phi, em))) / inner(psi, phi)
    scale = max(abs(forward.real), 1e-300)
    return abs(forward.real - backward.real) / scale
