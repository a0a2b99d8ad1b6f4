"""
Time evolution of wave fields.

The finite-difference path is the explicit three-level scheme
psi(t+dt) = psi(t-dt) - 2i(dt/hbar) H_d psi(t) with Dirichlet walls, in the
Coulomb gauge or in a gauge g(x, t). The magnetic scenario is evolved
spectrally from its Landau-level expansion instead.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Protocol, Tuple, runtime_checkable

import numpy as np

from ..constants import BOUNDARY_LEAK, CHARGE, EFFECTIVE_MASS, HBAR, STABILITY_LIMIT
from ..utils.exceptions import (
    BoundaryLeak,
    GaugeMixing,
    GridError,
    GridMismatch,
    NumericalBlowup,
    UnstableStep,
    UnsupportedOperator,
)
from ..utils.logger import PerformanceTimer
from .fields import (
    TIME_TOLERANCE,
    Grid1D,
    WaveField,
    dirichlet_diff,
    dirichlet_laplacian,
)
from .gauge import EmScenario, GaugeFunction, ScenarioKind, apply_gauge
from .operators import OperatorKind, OperatorSpec, apply
from .states import LandauBasis, LandauParams, PacketParams, gaussian_pair, hermite_functions

logger = logging.getLogger("weak_gauge_lab.core.propagator")

# Taylor order of the backward bootstrap used for fields without a closed form.
BOOTSTRAP_ORDER = 4


class GaugedScheme(Enum):
    """Discretization of the gauged Hamiltonian."""
    EXPANDED = "expanded"  # six explicit terms in g and its derivatives
    PEIERLS = "peierls"  # link phases around the Coulomb Laplacian


@dataclass(frozen=True)
class StatePair:
    """Two consecutive snapshots feeding the three-level stepper."""
    prev: WaveField
    cur: WaveField

    def __post_init__(self) -> None:
        if self.prev.grid != self.cur.grid:
            raise GridMismatch("State pair snapshots live on different grids")
        if self.prev.gauge_tag != self.cur.gauge_tag:
            raise GaugeMixing("State pair snapshots are in different gauges")
        dt = self.cur.grid.dt
        if abs((self.cur.t - self.prev.t) - dt) > max(TIME_TOLERANCE * dt, 1e-30):
            raise GridMismatch(
                f"State pair spacing {self.cur.t - self.prev.t:.6e} s differs from dt={dt:.6e} s"
            )

    @property
    def grid(self) -> Grid1D:
        return self.cur.grid

    @property
    def t(self) -> float:
        return self.cur.t

    @property
    def gauge(self) -> Optional[GaugeFunction]:
        return self.cur.gauge


@dataclass(frozen=True)
class StepRecord:
    step: int
    t: float
    norm: float
    boundary: float


@dataclass
class StepLog:
    """Norm and boundary history of one or more stepping runs."""
    records: List[StepRecord] = field(default_factory=list)

    def add(self, record: StepRecord) -> None:
        self.records.append(record)

    def extend(self, other: "StepLog") -> None:
        self.records.extend(other.records)

    @property
    def max_boundary(self) -> float:
        return max((r.boundary for r in self.records), default=0.0)

    @property
    def norm_drift(self) -> float:
        """Largest relative departure of the norm from the first record."""
        if not self.records:
            return 0.0
        reference = self.records[0].norm
        if reference == 0.0:
            return 0.0
        return max(abs(r.norm - reference) / reference for r in self.records)


def stability_coefficient(grid: Grid1D) -> float:
    """hbar*dt/(dx^2*m), bounded by 0.5 for the explicit scheme."""
    return HBAR * grid.dt / (grid.dx**2 * EFFECTIVE_MASS)


def check_stability(grid: Grid1D) -> float:
    """
    Raises:
        UnstableStep: If the stability coefficient exceeds the limit
    """
    coefficient = stability_coefficient(grid)
    if coefficient > STABILITY_LIMIT:
        raise UnstableStep(
            f"Stability coefficient {coefficient:.4f} exceeds {STABILITY_LIMIT}",
            details=f"dx={grid.dx:.4e} m, dt={grid.dt:.4e} s",
        )
    return coefficient


def _coulomb_and_gauge(em: EmScenario, gauge: Optional[GaugeFunction]) -> Tuple[EmScenario, Optional[GaugeFunction]]:
    """Accept potentials given either in the Coulomb gauge or already transformed by ``gauge``."""
    if not em.gauges:
        return em, gauge
    if len(em.gauges) == 1 and (gauge is None or em.gauges[0].tag == gauge.tag):
        return em.coulomb, em.gauges[0]
    raise GaugeMixing(
        "Stepper supports a single gauge function",
        details=f"potentials={em.gauge_tag!r}, requested={None if gauge is None else gauge.tag!r}",
    )


class Stepper:
    """
    Explicit three-level stepper for one scenario and gauge.

    An instance owns its rolling buffers and step log and is not shared
    between threads.
    """

    def __init__(
        self,
        em: EmScenario,
        gauge: Optional[GaugeFunction] = None,
        scheme: GaugedScheme = GaugedScheme.EXPANDED,
        log: Optional[StepLog] = None,
        check_every: int = 100,
        leak_tolerance: Optional[float] = BOUNDARY_LEAK,
    ) -> None:
        self.logger = logging.getLogger("weak_gauge_lab.core.propagator.Stepper")
        self.em, self.gauge = _coulomb_and_gauge(em, gauge)
        if self.em.kind is ScenarioKind.LANDAU_B:
            raise UnsupportedOperator("The magnetic scenario is evolved spectrally, not by finite differences")
        self.scheme = scheme
        self.log = log if log is not None else StepLog()
        self.check_every = max(1, int(check_every))
        self.leak_tolerance = leak_tolerance
        self._static_cache: Optional[Tuple[Grid1D, np.ndarray, np.ndarray]] = None

    @property
    def gauge_tag(self) -> Optional[str]:
        return None if self.gauge is None else self.gauge.tag

    @property
    def potentials(self) -> EmScenario:
        """Scenario with potentials expressed in this stepper's gauge."""
        return self.em if self.gauge is None else self.em.transformed(self.gauge)

    def _static_terms(self, grid: Grid1D) -> Tuple[np.ndarray, np.ndarray]:
        """Mesh coordinates and the time-independent Coulomb scalar potential."""
        if self._static_cache is None or self._static_cache[0] != grid:
            self._static_cache = (grid, grid.x, self.em.scalar_potential(grid.coords(), 0.0))
        return self._static_cache[1], self._static_cache[2]

    def _check_field(self, psi: WaveField) -> None:
        if psi.grid.ndim != 1:
            raise GridError("The finite-difference stepper is one-dimensional")
        if psi.gauge_tag != self.gauge_tag:
            raise GaugeMixing(
                "Field and stepper are in different gauges",
                details=f"field={psi.gauge_tag!r}, stepper={self.gauge_tag!r}",
            )

    def hamiltonian(self, data: np.ndarray, grid: Grid1D, t: float) -> np.ndarray:
        """Discrete Hamiltonian H_d applied to ``data`` at time ``t`` with zero walls."""
        x, static = self._static_terms(grid)
        kinetic = -(HBAR**2) / (2.0 * EFFECTIVE_MASS * grid.dx**2)
        if self.gauge is None:
            return kinetic * dirichlet_laplacian(data) + CHARGE * static * data
        if self.scheme is GaugedScheme.PEIERLS:
            link = np.exp(1j * CHARGE * self.gauge.value(x, t) / HBAR)
            g_t = self.gauge.d_t(x, t)
            return kinetic * link * dirichlet_laplacian(np.conj(link) * data) + CHARGE * (static - g_t) * data
        g, g_x, g_xx, g_t = _stencil_terms(self.gauge, x, t)
        m = EFFECTIVE_MASS
        return (
            kinetic * dirichlet_laplacian(data)
            + (1j * HBAR * CHARGE / (2.0 * m)) * g_xx * data
            + (1j * HBAR * CHARGE / m) * g_x * dirichlet_diff(data) / (2.0 * grid.dx)
            + (CHARGE**2 / (2.0 * m)) * g_x**2 * data
            + CHARGE * (static - g_t) * data
        )

    def step(self, sp: StatePair) -> WaveField:
        """One step of the three-level scheme; the caller rolls the pair forward."""
        self._check_field(sp.cur)
        check_stability(sp.grid)
        grid = sp.grid
        nxt = sp.prev.amplitudes - 2j * (grid.dt / HBAR) * self.hamiltonian(sp.cur.amplitudes, grid, sp.t)
        if not np.all(np.isfinite(nxt)):
            raise NumericalBlowup("Non-finite amplitudes after a single step", step=1)
        return sp.cur.with_amplitudes(nxt, t=sp.t + grid.dt)

    def bootstrap(self, psi: WaveField, order: int = BOOTSTRAP_ORDER) -> StatePair:
        """
        Build (psi(t-dt), psi(t)) for a field with no closed-form history.

        psi(t-dt) comes from the Taylor series of exp(+i H_d dt/hbar).
        """
        self._check_field(psi)
        grid = psi.grid
        factor = 1j * grid.dt / HBAR
        term = psi.amplitudes.astype(complex)
        total = term.copy()
        for n in range(1, order + 1):
            term = factor * self.hamiltonian(term, grid, psi.t) / n
            total = total + term
        return StatePair(psi.with_amplitudes(total, t=psi.t - grid.dt), psi)

    def steps_for(self, duration: float, grid: Grid1D) -> int:
        if duration < 0:
            raise GridError(f"Duration must be nonnegative, got {duration}")
        steps = int(round(duration / grid.dt))
        if abs(steps * grid.dt - duration) > TIME_TOLERANCE * max(duration, grid.dt):
            raise GridError(f"Duration {duration:.6e} s is not a multiple of dt={grid.dt:.6e} s")
        return steps

    def evolve(self, sp: StatePair, duration: float) -> StatePair:
        """
        Advance a pair by round(duration/dt) steps.

        Raises:
            UnstableStep: If the grid violates the stability bound
            NumericalBlowup: If non-finite amplitudes appear
            BoundaryLeak: If the edge amplitude exceeds the leak tolerance
        """
        self._check_field(sp.cur)
        grid = sp.grid
        steps = self.steps_for(duration, grid)
        if steps == 0:
            return sp
        check_stability(grid)
        t_start = sp.t
        prev = sp.prev.amplitudes.copy()
        cur = sp.cur.amplitudes.copy()
        factor = -2j * grid.dt / HBAR
        self._record(0, t_start, cur, grid)
        with PerformanceTimer(f"evolve {steps} steps ({self.gauge_tag or 'coulomb'})"):
            for j in range(steps):
                nxt = prev + factor * self.hamiltonian(cur, grid, t_start + j * grid.dt)
                prev, cur = cur, nxt
                done = j + 1
                if done % self.check_every == 0 or done == steps:
                    if not np.all(np.isfinite(cur)):
                        raise NumericalBlowup(
                            f"Non-finite amplitudes detected at step {done}",
                            step=done,
                            details=f"t={t_start + done * grid.dt:.6e} s",
                        )
                    self._record(done, t_start + done * grid.dt, cur, grid)
        t_end = t_start + steps * grid.dt
        return StatePair(
            sp.cur.with_amplitudes(prev, t=t_end - grid.dt),
            sp.cur.with_amplitudes(cur, t=t_end),
        )

    def _record(self, step: int, t: float, data: np.ndarray, grid: Grid1D) -> None:
        magnitude = np.abs(data)
        peak = magnitude.max()
        edge = 0.0 if peak == 0.0 else float(max(magnitude[0], magnitude[-1]) / peak)
        size = float(np.sqrt(np.sum(magnitude**2) * grid.dx))
        self.log.add(StepRecord(step, t, size, edge))
        if self.leak_tolerance is not None and edge > self.leak_tolerance:
            raise BoundaryLeak(
                f"Boundary amplitude {edge:.3e} exceeds {self.leak_tolerance:.1e} at step {step}",
                details=f"t={t:.6e} s",
            )

    def evolve_applied(self, op: OperatorSpec, psi: WaveField, duration: float) -> WaveField:
        """U(duration) applied to the non-normalized field O psi."""
        applied = psi.with_amplitudes(apply(op, psi, self.potentials))
        if duration == 0:
            return applied
        return self.evolve(self.bootstrap(applied), duration).cur


def _stencil_terms(gauge: GaugeFunction, x: np.ndarray, t: float) -> Tuple[np.ndarray, ...]:
    terms = getattr(gauge, "stencil_terms", None)
    if terms is not None:
        return terms(x, t)
    return gauge.value(x, t), gauge.d_x(x, t), gauge.d_xx(x, t), gauge.d_t(x, t)


def step_coulomb(sp: StatePair, em: EmScenario) -> WaveField:
    """
    One Coulomb-gauge step written out on the stencil.

    psi_k(t+dt) = psi_k(t-dt) + i*lam*(psi_{k+1} - 2psi_k + psi_{k-1}) - i(2q dt/hbar) A_s psi_k
    """
    if sp.cur.gauge_tag is not None or em.gauges:
        raise GaugeMixing("step_coulomb needs Coulomb-gauge fields and potentials")
    grid = sp.grid
    lam = check_stability(grid)
    cur = sp.cur.amplitudes
    potential = em.scalar_potential(grid.coords(), sp.t)
    nxt = (
        sp.prev.amplitudes
        + 1j * lam * dirichlet_laplacian(cur)
        - 1j * (2.0 * CHARGE * grid.dt / HBAR) * potential * cur
    )
    if not np.all(np.isfinite(nxt)):
        raise NumericalBlowup("Non-finite amplitudes after a Coulomb step", step=1)
    return sp.cur.with_amplitudes(nxt, t=sp.t + grid.dt)


def step_gauged(
    sp: StatePair, em: EmScenario, gs: GaugeFunction, scheme: GaugedScheme = GaugedScheme.EXPANDED
) -> WaveField:
    """One step of the gauged scheme for a pair expressed in gauge ``gs``."""
    if sp.cur.gauge_tag != gs.tag:
        raise GaugeMixing(
            "Pair is not expressed in the requested gauge",
            details=f"field={sp.cur.gauge_tag!r}, requested={gs.tag!r}",
        )
    return Stepper(em, gs, scheme).step(sp)


def evolve(
    sp: StatePair,
    em: EmScenario,
    gs: Optional[GaugeFunction],
    duration: float,
    log: Optional[StepLog] = None,
    scheme: GaugedScheme = GaugedScheme.EXPANDED,
) -> StatePair:
    """Advance ``sp`` by ``duration`` seconds; see Stepper.evolve."""
    return Stepper(em, gs, scheme, log=log).evolve(sp, duration)


def evolve_applied(
    op: OperatorSpec,
    psi: WaveField,
    em: EmScenario,
    gs: Optional[GaugeFunction],
    duration: float,
    scheme: GaugedScheme = GaugedScheme.EXPANDED,
) -> WaveField:
    """U(duration) O psi without renormalization."""
    return Stepper(em, gs, scheme, leak_tolerance=None).evolve_applied(op, psi, duration)


def seed_pair(
    params: PacketParams,
    grid: Grid1D,
    t0: float,
    em: EmScenario,
    gauge: Optional[GaugeFunction] = None,
) -> StatePair:
    """
    Analytic starting pair for a packet, optionally in a potential and a gauge.

    The second snapshot carries the phase exp(-i q A_s dt/hbar) of the Coulomb
    scalar potential on top of the free closed form.
    """
    em, gauge = _coulomb_and_gauge(em, gauge)
    first, second = gaussian_pair(params, grid, t0)
    if em.kind is ScenarioKind.UNIFORM_E:
        potential = em.scalar_potential(grid.coords(), t0)
        second = second.with_amplitudes(second.amplitudes * np.exp(-1j * CHARGE * potential * grid.dt / HBAR))
    if gauge is not None:
        first, second = apply_gauge(first, gauge), apply_gauge(second, gauge)
    return StatePair(first, second)


@runtime_checkable
class Preparation(Protocol):
    """A pre-selected state that can be instantiated in any gauge."""

    @property
    def t0(self) -> float: ...

    def pair(self, em: EmScenario, gauge: Optional[GaugeFunction]) -> StatePair: ...


@dataclass(frozen=True)
class PacketPreparation:
    """
    Gaussian packet whose current snapshot sits at ``t0``.

    The closed form is seeded one step earlier so that, as for the other
    preparations, ``pair().t == t0``.
    """
    params: PacketParams
    grid: Grid1D
    t0: float = 0.0

    def pair(self, em: EmScenario, gauge: Optional[GaugeFunction]) -> StatePair:
        return seed_pair(self.params, self.grid, self.t0 - self.grid.dt, em, gauge)


@dataclass(frozen=True)
class PairPreparation:
    """
    An already evolved Coulomb pair re-used as a fresh preparation.

    Used to re-prepare the pre-selected state at a later time without
    rerunning the evolution from zero.
    """
    source: StatePair

    def __post_init__(self) -> None:
        if self.source.cur.gauge_tag is not None:
            raise GaugeMixing("PairPreparation expects a Coulomb-gauge pair")

    @property
    def t0(self) -> float:
        return self.source.t

    def pair(self, em: EmScenario, gauge: Optional[GaugeFunction]) -> StatePair:
        _, gauge = _coulomb_and_gauge(em, gauge)
        if gauge is None:
            return self.source
        return StatePair(apply_gauge(self.source.prev, gauge), apply_gauge(self.source.cur, gauge))


@dataclass(frozen=True)
class FieldPreparation:
    """Arbitrary Coulomb-gauge field; its history is bootstrapped numerically."""
    field: WaveField
    scheme: GaugedScheme = GaugedScheme.EXPANDED

    @property
    def t0(self) -> float:
        return self.field.t

    def pair(self, em: EmScenario, gauge: Optional[GaugeFunction]) -> StatePair:
        em, gauge = _coulomb_and_gauge(em, gauge)
        psi = self.field if gauge is None else apply_gauge(self.field, gauge)
        return Stepper(em, gauge, self.scheme).bootstrap(psi)


@dataclass(frozen=True, eq=False)
class LandauState:
    """
    Landau-level superposition evolved by phases.

    c_n(t) = c_n(0) * exp(-i E_n t/hbar); fields are rebuilt from the basis on
    demand and local values are evaluated from the x-profiles alone.
    """
    basis: LandauBasis
    t0: float = 0.0

    @property
    def params(self) -> LandauParams:
        return self.basis.params

    def coeffs(self, t: float) -> np.ndarray:
        c0 = np.asarray(self.params.coeffs, dtype=complex)
        return c0 * np.exp(-1j * self.params.energies * (t - self.t0) / HBAR)

    def field(self, t: float) -> WaveField:
        return self.basis.field(self.coeffs(t), t)

    def rebased(self, t: float) -> "LandauState":
        """The same evolution, prepared afresh at ``t``."""
        params = replace(self.params, coeffs=tuple(self.coeffs(t)))
        return LandauState(replace(self.basis, params=params), t)

    def local_profile(self, x: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        x-profile and its derivative at arbitrary positions.

        Derivatives use the ladder relation
        phi_n' = (sqrt(n/2) phi_{n-1} - sqrt((n+1)/2) phi_{n+1}) / l_B.
        """
        lp = self.params
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xi = (x - lp.center) / lp.l_b
        funcs = hermite_functions(lp.n_max + 1, xi) / math.sqrt(lp.l_b)
        n = np.arange(lp.n_max)[:, None]
        lower = np.vstack([np.zeros((1,) + xi.shape), funcs[: lp.n_max - 1]])
        derivs = (np.sqrt(n / 2.0) * lower - np.sqrt((n + 1) / 2.0) * funcs[1 : lp.n_max + 1]) / lp.l_b
        c = self.coeffs(t)
        return c @ funcs[: lp.n_max], c @ derivs

    def local_velocity_ratio(self, x: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """(V_x psi / psi, V_y psi / psi) at positions x; the y ratio is real."""
        values, derivs = self.local_profile(x, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            vx = -1j * HBAR / EFFECTIVE_MASS * derivs / values
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vy = (HBAR * self.params.k_y - CHARGE * self.params.magnetic_field * x) / EFFECTIVE_MASS
        return vx, vy

    def applied_ratio(
        self, op: OperatorSpec, x: np.ndarray, y: np.ndarray, t_apply: float, t_post: float
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        <x,y|U(t_post - t_apply) O|psi(t_apply)> / <x,y|psi(t_post)>.

        Uses the Heisenberg image O_H(-s) of the linear cyclotron dynamics, so
        only psi(t_post) and its x-derivative at the point are needed.

        Returns:
            (ratio, |psi(t_post)| at the points relative to the profile peak)
        """
        s = t_post - t_apply
        c_x, c_y, c_vx, c_vy, c_1 = cyclotron_image(op, self.params.cyclotron, -s)
        vx, vy = self.local_velocity_ratio(x, t_post)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        ratio = c_x * x + c_y * y + c_vx * vx + c_vy * vy + c_1
        values, _ = self.local_profile(x, t_post)
        peak = np.max(np.abs(self.basis.profile(self.coeffs(t_post))))
        return ratio, np.abs(values) / (peak if peak > 0 else 1.0)


def cyclotron_image(op: OperatorSpec, cyclotron: float, s: float) -> Tuple[float, float, float, float, float]:
    """
    Coefficients of U^dagger(s) O U(s) = c_x X + c_y Y + c_vx V_x + c_vy V_y + c_1.

    Velocities rotate at the signed rate w = qB/m:
    V_x(s) = V_x cos ws + V_y sin ws, V_y(s) = -V_x sin ws + V_y cos ws.
    """
    w = cyclotron
    c, sn = math.cos(w * s), math.sin(w * s)
    kind = op.kind
    if kind is OperatorKind.IDENTITY:
        return 0.0, 0.0, 0.0, 0.0, 1.0
    if kind is OperatorKind.POSITION:
        return 1.0, 0.0, sn / w, (1.0 - c) / w, 0.0
    if kind is OperatorKind.POSITION_Y:
        return 0.0, 1.0, (c - 1.0) / w, sn / w, 0.0
    if kind is OperatorKind.VELOCITY:
        return 0.0, 0.0, c, sn, 0.0
    if kind is OperatorKind.VELOCITY_Y:
        return 0.0, 0.0, -sn, c, 0.0
    raise UnsupportedOperator(f"No closed-form cyclotron image for {op.name}")


def landau_evolve(ls: LandauState, t: float) -> WaveField:
    """
    Spectral evolution of a Landau superposition.

    Raises:
        GridError: If t is negative
    """
    if t < 0:
        raise GridError(f"Landau evolution time must be nonnegative, got {t}")
    return ls.field(t)

