"""
Field sensing from weak-value derivatives.

Electric field: E = [d/dt_R W(K | x)] / (q v_B) with the pre-selected state
re-prepared at each reading time. Magnetic field:
B = -(m/q) [d2/dt_L dt_R W(Y | x, y)] / [d/dt_L W(X | x, y)], with the t_R
legs following the local Bohmian flow.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..constants import CHARGE, EFFECTIVE_MASS, MIN_SENSOR_VELOCITY
from ..utils.exceptions import NearZeroVelocity, NumericalError
from .bohmian import Trajectory, bohm_velocity_at, quantum_potential_at
from .gauge import EmScenario, GaugeFunction
from .operators import KINETIC_ENERGY, POSITION, POSITION_Y
from .propagator import GaugedScheme, LandauState, PairPreparation, StatePair, Stepper
from .weakeval import (
    SelectionPair,
    WeakValueEvaluator,
    WeakValueSample,
    PointPost,
    fdlhd,
    fdrhd,
    mixed_second_derivative,
)

logger = logging.getLogger("weak_gauge_lab.core.sensing")


class KineticRoute(Enum):
    """How the kinetic-energy weak value is obtained."""
    DIRECT = "direct"  # (K psi)(x)/psi(x)
    BOHMIAN = "bohmian"  # m v_B^2/2 + Q


@dataclass(frozen=True)
class ReadingPoint:
    traj_id: int
    t: float
    position: Tuple[float, ...]


@dataclass(frozen=True)
class SensorReading:
    """One field estimate anchored at a single position and time."""
    traj_id: int
    t: float
    position: Tuple[float, ...]
    estimate: float
    unit: str
    flagged: bool
    inputs: Tuple[WeakValueSample, ...] = ()
    spread: Optional[float] = None


@dataclass(frozen=True)
class KineticWeakValue:
    direct: float
    bohmian: float
    flagged: bool


@dataclass(frozen=True)
class SensorSummary:
    mean: float
    spread: float
    count: int
    excluded: int


def reading_points(trajectories: Sequence[Trajectory], times: Iterable[float]) -> List[ReadingPoint]:
    """Sample every trajectory at every requested time (nearest recorded sample)."""
    points = []
    for t in times:
        for traj in trajectories:
            points.append(ReadingPoint(traj.traj_id, float(t), tuple(float(c) for c in traj.position_at(t))))
    return points


def kinetic_weak_value(x: float, t_r: float, sel: SelectionPair) -> KineticWeakValue:
    """
    Kinetic-energy weak value post-selected at ``x`` after ``t_r``.

    Both the operator route and the Bohmian route (m v_B^2/2 + Q) are
    evaluated; their real parts agree up to discretization.
    """
    ev = WeakValueEvaluator(sel)
    post = PointPost.at(x)
    sample = ev.sample(KINETIC_ENERGY, 0.0, t_r, post=post)
    psi = ev.pre_at(t_r).cur
    v = bohm_velocity_at(psi, ev.potentials, (x,))[0]
    bohmian = 0.5 * EFFECTIVE_MASS * v**2 + quantum_potential_at(psi, (x,))
    flagged = sample.flagged or not np.isfinite(bohmian)
    return KineticWeakValue(sample.real, float(bohmian), bool(flagged))


def _check_velocity(v: float, what: str, point: ReadingPoint) -> None:
    if not np.isfinite(v) or abs(v) < MIN_SENSOR_VELOCITY:
        raise NearZeroVelocity(
            f"{what} {v:.3e} m/s below {MIN_SENSOR_VELOCITY:.0e} m/s",
            details=f"traj={point.traj_id}, t={point.t:.6e} s, position={point.position}",
        )


def _electric_reading(
    point: ReadingPoint,
    pair: StatePair,
    em: EmScenario,
    gauge: Optional[GaugeFunction],
    scheme: GaugedScheme,
    stride: float,
    route: KineticRoute,
) -> SensorReading:
    sel = SelectionPair(PairPreparation(pair), PointPost(point.position), em, gauge, scheme)
    ev = WeakValueEvaluator(sel)
    v_b = bohm_velocity_at(ev.pre_at(0.0).cur, ev.potentials, point.position)[0]
    _check_velocity(v_b, "Bohmian velocity", point)
    if route is KineticRoute.DIRECT:
        est = fdrhd(KINETIC_ENERGY, 0.0, stride, sel)
        rate, flagged, inputs = est.value, est.flagged, est.samples
    else:
        early = kinetic_weak_value(point.position[0], 0.0, sel)
        late = kinetic_weak_value(point.position[0], stride, sel)
        rate = (late.bohmian - early.bohmian) / stride
        flagged, inputs = early.flagged or late.flagged, ()
    return SensorReading(point.traj_id, point.t, point.position, rate / (CHARGE * v_b), "V/m", bool(flagged), inputs)


def estimate_E(
    points: Sequence[ReadingPoint],
    pair: StatePair,
    em: EmScenario,
    stride: float,
    gauge: Optional[GaugeFunction] = None,
    scheme: GaugedScheme = GaugedScheme.EXPANDED,
    route: KineticRoute = KineticRoute.DIRECT,
    strict: bool = False,
) -> List[SensorReading]:
    """
    Electric-field readings at (time, position) points.

    The Coulomb pair is evolved once through the sorted reading times and
    re-prepared at each of them.

    Args:
        points: Reading anchors, times not earlier than the pair's
        pair: Coulomb-gauge pre-selected pair
        em: Uniform-field scenario (Coulomb potentials)
        stride: t_R stride of the right-hand finite difference
        gauge: Gauge the weak values are evaluated in
        scheme: Gauged stepper discretization
        route: Kinetic-energy weak value route
        strict: Raise instead of flagging readings at slow points

    Raises:
        NearZeroVelocity: With ``strict`` when |v_B| < 1e3 m/s at a point
    """
    stepper = Stepper(em)
    current = pair
    readings = []
    for point in sorted(points, key=lambda p: (p.t, p.traj_id)):
        if point.t < current.t - 1e-6 * current.grid.dt:
            raise NumericalError(f"Reading time {point.t:.6e} s precedes the state at {current.t:.6e} s")
        steps = stepper.steps_for(point.t - current.t, current.grid) if point.t > current.t else 0
        if steps:
            current = stepper.evolve(current, steps * current.grid.dt)
        try:
            readings.append(_electric_reading(point, current, em, gauge, scheme, stride, route))
        except NearZeroVelocity as e:
            if strict:
                raise
            logger.warning(f"Excluding E reading: {e.message}")
            readings.append(SensorReading(point.traj_id, point.t, point.position, float("nan"), "V/m", True))
    logger.info(f"Collected {len(readings)} E readings ({sum(r.flagged for r in readings)} flagged)")
    return readings


def _magnetic_reading(point: ReadingPoint, state: LandauState, em: EmScenario, stride: float) -> SensorReading:
    rebased = state.rebased(point.t)
    post = PointPost(point.position)
    sel = SelectionPair(rebased, post, em)
    x, y = point.position
    vx, vy = rebased.local_velocity_ratio(np.array([x]), point.t)
    v = (float(vx[0].real), float(vy[0]))
    _check_velocity(v[0], "x-velocity", point)
    velocity = fdlhd(POSITION, stride, 0.0, sel)
    _check_velocity(velocity.value, "x-velocity weak value", point)
    accel = mixed_second_derivative(POSITION_Y, stride, stride, sel, drift=v)
    estimate = -(EFFECTIVE_MASS / CHARGE) * accel.value / velocity.value
    return SensorReading(
        point.traj_id,
        point.t,
        point.position,
        estimate,
        "T",
        bool(velocity.flagged or accel.flagged),
        velocity.samples + accel.samples,
    )


def estimate_B(
    points: Sequence[ReadingPoint],
    state: LandauState,
    em: EmScenario,
    stride: float,
    strict: bool = False,
) -> List[SensorReading]:
    """
    Magnetic-field readings at 2D (time, position) points of a Landau state.

    Points where |v_x| < 1e3 m/s (orbit turning points) are flagged, or
    raise NearZeroVelocity with ``strict``.
    """
    readings = []
    for point in points:
        if len(point.position) != 2:
            raise NumericalError("Magnetic readings need 2D positions")
        try:
            readings.append(_magnetic_reading(point, state, em, stride))
        except NearZeroVelocity as e:
            if strict:
                raise
            logger.debug(f"Excluding B reading: {e.message}")
            readings.append(SensorReading(point.traj_id, point.t, point.position, float("nan"), "T", True))
    excluded = sum(r.flagged for r in readings)
    logger.info(f"Collected {len(readings)} B readings ({excluded} excluded)")
    return readings


def summarize_readings(readings: Sequence[SensorReading]) -> SensorSummary:
    """Mean and standard deviation over the unflagged readings."""
    values = np.array([r.estimate for r in readings if not r.flagged and np.isfinite(r.estimate)])
    excluded = len(readings) - len(values)
    if len(values) == 0:
        return SensorSummary(float("nan"), float("nan"), 0, excluded)
    spread = float(np.std(values, ddof=1)) if len(values) >= 2 else float("nan")
    return SensorSummary(float(np.mean(values)), spread, len(values), excluded)


def with_spread(readings: Sequence[SensorReading]) -> List[SensorReading]:
    """Attach the ensemble spread of each reading time to its readings."""
    out = []
    times = sorted({r.t for r in readings})
    for t in times:
        group = [r for r in readings if r.t == t]
        spread = summarize_readings(group).spread
        out.extend(
            SensorReading(r.traj_id, r.t, r.position, r.estimate, r.unit, r.flagged, r.inputs,
                          None if np.isnan(spread) else spread)
            for r in group
        )
    return out


def reading_spread(runs: Sequence[Sequence[SensorReading]]) -> float:
    """
    Largest relative disagreement between repeated runs over the same points.

    Readings are matched by (trajectory, time); only points usable in every
    run count. Each point contributes (max - min) / |first run's estimate|.

    Returns:
        The largest relative spread, or nan if no point is usable in all runs
    """
    if len(runs) < 2:
        raise NumericalError("A reading spread needs at least two runs")
    usable = [
        {(r.traj_id, r.t): r.estimate for r in run if not r.flagged and np.isfinite(r.estimate)}
        for run in runs
    ]
    common = set(usable[0]).intersection(*usable[1:])
    worst = float("nan")
    for key in common:
        values = np.array([u[key] for u in usable])
        ref = abs(values[0])
        change = float(values.max() - values.min()) / ref if ref > 0 else float("inf")
        worst = change if np.isnan(worst) else max(worst, change)
    return worst
