"""
Tests for the electric and magnetic field sensors.
"""

import numpy as np
import pytest

from weak_gauge_lab.constants import NM
from weak_gauge_lab.core.bohmian import Trajectory
from weak_gauge_lab.core.gauge import EmScenario
from weak_gauge_lab.core.propagator import LandauState, PacketPreparation, seed_pair
from weak_gauge_lab.core.sensing import (
    KineticRoute,
    ReadingPoint,
    SensorReading,
    estimate_B,
    estimate_E,
    kinetic_weak_value,
    reading_points,
    reading_spread,
    summarize_readings,
    with_spread,
)
from weak_gauge_lab.core.states import landau_superposition
from weak_gauge_lab.core.weakeval import PointPost, SelectionPair
from weak_gauge_lab.utils.exceptions import NearZeroVelocity, NumericalError

FIELD = -1e6


@pytest.fixture
def electric() -> EmScenario:
    return EmScenario.uniform_electric(FIELD)


@pytest.fixture
def pair(small_grid, packet1, electric):
    return seed_pair(packet1, small_grid, 0.0, electric)


def _points(pair, offsets_nm, t=None):
    t = pair.t if t is None else t
    return [ReadingPoint(i, t, (400 * NM + off * NM,)) for i, off in enumerate(offsets_nm)]


def _landau_points(params):
    anchors = [(2e-12, -100), (2e-12, 0), (2e-12, 100), (3.5e-12, -50), (3.5e-12, 50)]
    return [ReadingPoint(i, t, (params.center + dx * NM, 0.0)) for i, (t, dx) in enumerate(anchors)]


class TestReadingPoints:
    """Test sampling trajectories at reading times."""

    def test_every_trajectory_at_every_time(self):
        times = np.linspace(0.0, 1.0, 11)
        trajs = [Trajectory(i, times, (times + i)[:, None]) for i in range(3)]
        points = reading_points(trajs, [0.2, 0.8])
        assert len(points) == 6
        assert points[4].traj_id == 1
        assert points[4].t == pytest.approx(0.8)
        assert points[4].position[0] == pytest.approx(1.8)


class TestKineticWeakValue:
    """Test the two routes to the local kinetic energy."""

    def test_routes_agree(self, small_grid, packet1, electric):
        sel = SelectionPair(PacketPreparation(packet1, small_grid), PointPost.at(packet1.x_c), electric)
        kinetic = kinetic_weak_value(packet1.x_c, 0.0, sel)
        assert not kinetic.flagged
        assert kinetic.direct == pytest.approx(kinetic.bohmian, rel=1e-2)


class TestElectricSensor:
    """Test electric-field readings on a packet in a uniform field."""

    @pytest.mark.parametrize("route", list(KineticRoute), ids=lambda r: r.value)
    def test_recovers_the_field(self, pair, electric, small_grid, route):
        readings = estimate_E(_points(pair, [0, 30]), pair, electric, 2 * small_grid.dt, route=route)
        assert [r.unit for r in readings] == ["V/m", "V/m"]
        for reading in readings:
            assert not reading.flagged
            assert reading.estimate == pytest.approx(FIELD, rel=2e-2)

    def test_gauge_invariant(self, pair, electric, small_grid, gauge):
        points = _points(pair, [0])
        plain = estimate_E(points, pair, electric, 2 * small_grid.dt)[0]
        gauged = estimate_E(points, pair, electric, 2 * small_grid.dt, gauge=gauge)[0]
        assert gauged.estimate == pytest.approx(plain.estimate, rel=1e-2)
        assert reading_spread([[plain], [gauged]]) < 0.02

    def test_doubling_the_stride(self, pair, electric, small_grid):
        points = _points(pair, [0, 30])
        base = estimate_E(points, pair, electric, 2 * small_grid.dt)
        doubled = estimate_E(points, pair, electric, 4 * small_grid.dt)
        assert reading_spread([base, doubled]) < 0.02

    def test_later_readings_evolve_the_state(self, pair, electric, small_grid):
        later = pair.t + 20 * small_grid.dt
        [reading] = estimate_E(_points(pair, [5], t=later), pair, electric, 2 * small_grid.dt)
        assert reading.t == later
        assert reading.estimate == pytest.approx(FIELD, rel=2e-2)

    def test_empty_region_is_flagged(self, pair, electric, small_grid):
        [reading] = estimate_E(_points(pair, [650]), pair, electric, 2 * small_grid.dt)
        assert reading.flagged
        assert np.isnan(reading.estimate)

    def test_strict_mode_raises(self, pair, electric, small_grid):
        with pytest.raises(NearZeroVelocity):
            estimate_E(_points(pair, [650]), pair, electric, 2 * small_grid.dt, strict=True)

    def test_reading_before_the_state(self, pair, electric, small_grid):
        with pytest.raises(NumericalError):
            estimate_E(_points(pair, [0], t=-small_grid.dt), pair, electric, 2 * small_grid.dt)


class TestMagneticSensor:
    """Test magnetic-field readings on a Landau superposition."""

    def test_recovers_the_field(self, landau_params, landau_grid):
        _, basis = landau_superposition(landau_params, landau_grid)
        state = LandauState(basis)
        readings = estimate_B(_landau_points(landau_params), state, EmScenario.landau(0.19), 1e-16)
        good = [r for r in readings if not r.flagged]
        assert good
        for reading in good:
            assert reading.unit == "T"
            assert reading.estimate == pytest.approx(0.19, rel=1e-2)

    def test_halving_the_stride(self, landau_params, landau_grid):
        _, basis = landau_superposition(landau_params, landau_grid)
        state = LandauState(basis)
        em = EmScenario.landau(0.19)
        points = _landau_points(landau_params)
        full = estimate_B(points, state, em, 1e-16)
        half = estimate_B(points, state, em, 5e-17)
        assert reading_spread([full, half]) < 0.01

    def test_needs_2d_points(self, landau_params, landau_grid):
        _, basis = landau_superposition(landau_params, landau_grid)
        with pytest.raises(NumericalError):
            estimate_B([ReadingPoint(0, 0.0, (0.0,))], LandauState(basis), EmScenario.landau(0.19), 1e-16)


class TestSummaries:
    """Test ensemble statistics over readings."""

    READINGS = [
        SensorReading(0, 0.0, (0.0,), 1.0, "V/m", False),
        SensorReading(1, 0.0, (1.0,), 3.0, "V/m", False),
        SensorReading(2, 0.0, (2.0,), float("nan"), "V/m", True),
        SensorReading(0, 1.0, (0.5,), 5.0, "V/m", False),
    ]

    def test_summary_skips_flagged(self):
        summary = summarize_readings(self.READINGS)
        assert summary.count == 3
        assert summary.excluded == 1
        assert summary.mean == pytest.approx(3.0)

    def test_empty_summary(self):
        summary = summarize_readings(self.READINGS[2:3])
        assert summary.count == 0
        assert np.isnan(summary.mean)

    def test_spread_per_time(self):
        spread = {(r.traj_id, r.t): r.spread for r in with_spread(self.READINGS)}
        assert spread[(0, 0.0)] == pytest.approx(np.std([1.0, 3.0], ddof=1))
        assert spread[(0, 1.0)] is None


class TestReadingSpread:
    """Test the comparison of repeated sensor runs."""

    BASE = [
        SensorReading(0, 0.0, (0.0,), -1.00e6, "V/m", False),
        SensorReading(1, 0.0, (1.0,), -1.00e6, "V/m", False),
        SensorReading(2, 0.0, (2.0,), float("nan"), "V/m", True),
    ]

    def test_largest_change_relative_to_the_first_run(self):
        other = [
            SensorReading(1, 0.0, (1.0,), -1.03e6, "V/m", False),
            SensorReading(0, 0.0, (0.0,), -1.01e6, "V/m", False),
            SensorReading(2, 0.0, (2.0,), -5.0e6, "V/m", False),
        ]
        assert reading_spread([self.BASE, other]) == pytest.approx(0.03)

    def test_three_runs(self):
        low = [SensorReading(0, 0.0, (0.0,), -0.98e6, "V/m", False)]
        high = [SensorReading(0, 0.0, (0.0,), -1.02e6, "V/m", False)]
        assert reading_spread([self.BASE, low, high]) == pytest.approx(0.04)

    def test_no_common_usable_point(self):
        other = [SensorReading(0, 1.0, (0.0,), -1.0e6, "V/m", False)]
        assert np.isnan(reading_spread([self.BASE, other]))

    def test_needs_two_runs(self):
        with pytest.raises(NumericalError):
            reading_spread([self.BASE])
