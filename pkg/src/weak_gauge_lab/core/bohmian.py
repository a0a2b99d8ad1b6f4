"""
Bohmian velocity fields, quantum potential and trajectory ensembles.

Velocities are only evaluated where |psi|^2 exceeds DENSITY_MASK of its
peak; elsewhere they carry NaN so that a trajectory entering a node is
reported instead of silently blowing up.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import RegularGridInterpolator
from scipy.stats import ks_1samp

from ..constants import DENSITY_MASK, EFFECTIVE_MASS, HBAR
from ..utils.exceptions import GridError, NumericalError, TrajectoryLost
from .fields import Grid1D, Grid2D, WaveField, gradient, second_diff
from .gauge import EmScenario, GaugeFunction
from .operators import covariant_gradient
from .propagator import GaugedScheme, LandauState, StatePair, StepLog, Stepper

logger = logging.getLogger("weak_gauge_lab.core.bohmian")


def density_mask(psi: WaveField) -> np.ndarray:
    """True where the density is high enough for velocities to be evaluated."""
    density = psi.density
    peak = density.max()
    return density > DENSITY_MASK * peak if peak > 0 else np.zeros(density.shape, dtype=bool)


def bohm_velocity(psi: WaveField, em: Optional[EmScenario] = None, axis: int = 0) -> np.ndarray:
    """
    v_B = (hbar/m) Im(D psi / psi) along ``axis``, D the covariant derivative.

    Args:
        psi: Field in any gauge
        em: Potentials in the field's gauge (None for zero vector potential)
        axis: 0 for x, 1 for y

    Returns:
        Real array, NaN where the density is masked
    """
    mask = density_mask(psi)
    derivative = covariant_gradient(psi.amplitudes, psi, em, axis)
    out = np.full(psi.grid.shape, np.nan)
    out[mask] = HBAR / EFFECTIVE_MASS * np.imag(derivative[mask] / psi.amplitudes[mask])
    return out


def osmotic_velocity(psi: WaveField, axis: int = 0) -> np.ndarray:
    """
    v_O = (hbar/m) dR/R with R = |psi|.

    The imaginary part of the velocity weak value post-selected in position
    equals -v_O with this sign choice.
    """
    mask = density_mask(psi)
    amplitude = np.abs(psi.amplitudes)
    slope = gradient(amplitude, psi.grid.spacings[axis], axis)
    out = np.full(psi.grid.shape, np.nan)
    out[mask] = HBAR / EFFECTIVE_MASS * slope[mask] / amplitude[mask]
    return out


def quantum_potential(psi: WaveField) -> np.ndarray:
    """Q = -(hbar^2/2m) lap(R)/R, NaN where masked."""
    mask = density_mask(psi)
    amplitude = np.abs(psi.amplitudes)
    curvature = sum(
        second_diff(amplitude, spacing, axis) for axis, spacing in enumerate(psi.grid.spacings)
    )
    out = np.full(psi.grid.shape, np.nan)
    out[mask] = -(HBAR**2) / (2.0 * EFFECTIVE_MASS) * curvature[mask] / amplitude[mask]
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Positions (n_t, ndim) sampled at strictly increasing times."""
    traj_id: int
    times: np.ndarray
    positions: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if np.any(np.diff(self.times) <= 0):
            raise NumericalError("Trajectory times must be strictly increasing")

    @property
    def ndim(self) -> int:
        return self.positions.shape[1]

    def velocities(self, axis: int = 0) -> np.ndarray:
        return np.gradient(self.positions[:, axis], self.times)

    def position_at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        return self.positions[k]


class VelocitySource(Protocol):
    """Velocity field provider for trajectory integration."""

    @property
    def spacings(self) -> Tuple[float, ...]: ...

    def velocity(self, t: float, positions: np.ndarray) -> np.ndarray: ...


def _interpolator(grid, field: np.ndarray):
    if isinstance(grid, Grid1D):
        x = grid.x
        return lambda pts: np.interp(pts[:, 0], x, field, left=np.nan, right=np.nan)
    interp = RegularGridInterpolator(grid.axes(), field, bounds_error=False, fill_value=np.nan)
    return lambda pts: interp(pts)


def _field_velocity(psi: WaveField, em: Optional[EmScenario]):
    components = [_interpolator(psi.grid, bohm_velocity(psi, em, axis)) for axis in range(psi.grid.ndim)]
    return lambda pts: np.column_stack([c(pts) for c in components])


def bohm_velocity_at(psi: WaveField, em: Optional[EmScenario], position: Sequence[float]) -> np.ndarray:
    """Bohmian velocity vector at one off-grid position (NaN if masked or outside)."""
    point = np.asarray(position, dtype=float).reshape(1, -1)
    return _field_velocity(psi, em)(point)[0]


def quantum_potential_at(psi: WaveField, position: Sequence[float]) -> float:
    point = np.asarray(position, dtype=float).reshape(1, -1)
    return float(_interpolator(psi.grid, quantum_potential(psi))(point)[0])


class FieldVelocitySource:
    """Velocity from a fixed list of snapshots; the latest one at or before t is used."""

    def __init__(self, snapshots: Sequence[WaveField], em: Optional[EmScenario] = None) -> None:
        if not snapshots:
            raise NumericalError("At least one snapshot is required")
        self.snapshots = sorted(snapshots, key=lambda s: s.t)
        self.em = em
        self._cache: Dict[int, object] = {}

    @property
    def spacings(self) -> Tuple[float, ...]:
        return self.snapshots[0].grid.spacings

    def velocity(self, t: float, positions: np.ndarray) -> np.ndarray:
        times = np.array([s.t for s in self.snapshots])
        k = max(int(np.searchsorted(times, t + 1e-6 * self.snapshots[0].grid.dt, side="right")) - 1, 0)
        if k not in self._cache:
            self._cache[k] = _field_velocity(self.snapshots[k], self.em)
        return self._cache[k](positions)


class PropagatedVelocitySource:
    """
    Velocity from a pair advanced alongside the trajectories.

    Queries must come with nondecreasing times; the field is stepped forward
    to the last grid time not after the query. A query between the pair's two
    snapshots reads the earlier one.
    """

    def __init__(
        self,
        pair: StatePair,
        em: EmScenario,
        gauge: Optional[GaugeFunction] = None,
        scheme: GaugedScheme = GaugedScheme.EXPANDED,
        log: Optional[StepLog] = None,
    ) -> None:
        self.stepper = Stepper(em, gauge, scheme, log=log)
        self.pair = pair
        self._velocity = None
        self._velocity_t: Optional[float] = None

    @property
    def spacings(self) -> Tuple[float, ...]:
        return self.pair.grid.spacings

    def snapshot_at(self, t: float) -> WaveField:
        dt = self.pair.grid.dt
        steps = int(math.floor((t - self.pair.t) / dt + 1e-6))
        if steps == -1:
            return self.pair.prev
        if steps < -1:
            raise NumericalError(f"Cannot step backwards from t={self.pair.t:.6e} to t={t:.6e}")
        if steps:
            self.pair = self.stepper.evolve(self.pair, steps * dt)
        return self.pair.cur

    def velocity(self, t: float, positions: np.ndarray) -> np.ndarray:
        psi = self.snapshot_at(t)
        if self._velocity_t != psi.t:
            self._velocity = _field_velocity(psi, self.stepper.potentials)
            self._velocity_t = psi.t
        return self._velocity(positions)


class LandauVelocitySource:
    """Closed-form velocities of a Landau superposition, evaluated from its x-profiles."""

    def __init__(self, state: LandauState) -> None:
        self.state = state
        self._peak: Dict[float, float] = {}

    @property
    def spacings(self) -> Tuple[float, ...]:
        return self.state.basis.grid.spacings

    def _peak_density(self, t: float) -> float:
        if t not in self._peak:
            profile = self.state.basis.profile(self.state.coeffs(t))
            self._peak[t] = float(np.max(np.abs(profile)) ** 2)
        return self._peak[t]

    def velocity(self, t: float, positions: np.ndarray) -> np.ndarray:
        x = positions[:, 0]
        vx, vy = self.state.local_velocity_ratio(x, t)
        values, _ = self.state.local_profile(x, t)
        masked = np.abs(values) ** 2 <= DENSITY_MASK * self._peak_density(t)
        out = np.column_stack([vx.real, vy])
        out[masked] = np.nan
        return out


def _drop_lost(v: np.ndarray, alive: np.ndarray, t: float, drop_lost: bool) -> np.ndarray:
    lost = alive & np.any(~np.isfinite(v), axis=1)
    if not np.any(lost):
        return alive
    if not drop_lost:
        raise TrajectoryLost(f"Trajectories {np.flatnonzero(lost).tolist()} entered the masked region", t=t)
    logger.warning(f"Dropping {int(lost.sum())} trajectories at t={t:.6e} s")
    return alive & ~lost


def integrate_ensemble(
    starts: np.ndarray,
    source: VelocitySource,
    t0: float,
    t1: float,
    dt: float,
    seed: Optional[int] = None,
    drop_lost: bool = False,
) -> List[Trajectory]:
    """
    Explicit Euler for many trajectories at once.

    Each step of length dt is split into ceil(max|v| dt / spacing) sub-steps
    with the velocity field frozen at the step's start time, so no cell is
    skipped.

    Args:
        starts: Initial positions, shape (n, ndim) or (n,) in 1D
        source: Velocity field provider
        t0, t1: Integration window
        dt: Output sampling step
        seed: Recorded on each trajectory
        drop_lost: Freeze trajectories that reach the masked region instead
            of raising

    Raises:
        TrajectoryLost: If a trajectory reaches the masked region
    """
    ndim = len(source.spacings)
    pos = np.asarray(starts, dtype=float).reshape(-1, ndim)
    steps = int(round((t1 - t0) / dt))
    if steps < 1:
        raise NumericalError(f"Integration window [{t0:.4e}, {t1:.4e}] is shorter than dt")
    spacing = np.asarray(source.spacings)
    history = np.empty((steps + 1,) + pos.shape)
    history[0] = pos
    alive = np.ones(pos.shape[0], dtype=bool)
    for j in range(steps):
        t = t0 + j * dt
        v = source.velocity(t, pos)
        alive = _drop_lost(v, alive, t, drop_lost)
        speed = float(np.max(np.abs(v[alive]) / spacing)) if np.any(alive) else 0.0
        sub = max(1, int(math.ceil(speed * dt)))
        for k in range(sub):
            if k:
                v = source.velocity(t, pos)
                alive = _drop_lost(v, alive, t, drop_lost)
            pos = pos + np.where(alive[:, None], v, 0.0) * (dt / sub)
        history[j + 1] = pos
    times = t0 + dt * np.arange(steps + 1)
    return [Trajectory(i, times, history[:, i, :], seed) for i in range(pos.shape[0])]


def integrate_trajectory(
    x0: Sequence[float], source: VelocitySource, t0: float, t1: float, dt: float, seed: Optional[int] = None
) -> Trajectory:
    """Single trajectory; see integrate_ensemble."""
    start = np.asarray(x0, dtype=float).reshape(1, -1)
    return integrate_ensemble(start, source, t0, t1, dt, seed)[0]


def _normalized_cdf(density: np.ndarray, axis_values: np.ndarray) -> np.ndarray:
    cdf = cumulative_trapezoid(density, axis_values, initial=0.0)
    total = cdf[-1]
    if total <= 0:
        raise NumericalError("Cannot sample from a zero density")
    return cdf / total


def sample_initial_positions(psi: WaveField, n: int, seed: int) -> np.ndarray:
    """
    Draw n positions from |psi|^2 by inverse CDF.

    2D fields use the x marginal and then the y conditional on the nearest
    x row. The PCG64 stream is fully determined by ``seed``.

    Returns:
        Array of shape (n, ndim)
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    density = psi.density
    if psi.grid.ndim == 1:
        x = psi.grid.x
        samples = np.interp(rng.random(n), _normalized_cdf(density, x), x)
        return samples.reshape(-1, 1)
    grid: Grid2D = psi.grid
    x, y = grid.axes()
    marginal = trapezoid(density, y, axis=1)
    xs = np.interp(rng.random(n), _normalized_cdf(marginal, x), x)
    u = rng.random(n)
    ys = np.empty(n)
    for i, xi in enumerate(xs):
        row = density[grid.x_axis.nearest_index(xi)]
        ys[i] = np.interp(u[i], _normalized_cdf(row, y), y)
    return np.column_stack([xs, ys])


def oscillation_period(times: np.ndarray, series: np.ndarray) -> float:
    """
    Mean spacing of upward mean-crossings, linearly interpolated.

    Raises:
        NumericalError: If fewer than two crossings are present
    """
    centred = np.asarray(series) - np.mean(series)
    idx = np.flatnonzero((centred[:-1] < 0) & (centred[1:] >= 0))
    if len(idx) < 2:
        raise NumericalError("Series does not complete a full oscillation")
    t_a, t_b = times[idx], times[idx + 1]
    s_a, s_b = centred[idx], centred[idx + 1]
    crossings = t_a - s_a * (t_b - t_a) / (s_b - s_a)
    return float(np.mean(np.diff(crossings)))


def ks_distance(samples: np.ndarray, psi: WaveField) -> float:
    """Kolmogorov-Smirnov distance between samples and the 1D density |psi|^2."""
    if psi.grid.ndim != 1:
        raise GridError("ks_distance compares against a 1D density")
    x = psi.grid.x
    cdf = _normalized_cdf(psi.density, x)
    return float(ks_1samp(np.ravel(samples), lambda s: np.interp(s, x, cdf)).statistic)
