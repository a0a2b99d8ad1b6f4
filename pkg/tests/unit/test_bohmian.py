"""
Tests for Bohmian velocity fields and trajectory ensembles.
"""

import math

import numpy as np
import pytest

from weak_gauge_lab.constants import CHARGE, EFFECTIVE_MASS, FS, HBAR, NM
from weak_gauge_lab.core.bohmian import (
    FieldVelocitySource,
    LandauVelocitySource,
    PropagatedVelocitySource,
    Trajectory,
    bohm_velocity,
    density_mask,
    integrate_ensemble,
    integrate_trajectory,
    ks_distance,
    oscillation_period,
    osmotic_velocity,
    quantum_potential,
    sample_initial_positions,
)
from weak_gauge_lab.core.fields import Grid1D
from weak_gauge_lab.core.propagator import LandauState, seed_pair
from weak_gauge_lab.core.states import gaussian_field, landau_superposition
from weak_gauge_lab.utils.exceptions import NumericalError, TrajectoryLost


@pytest.fixture
def packet_field(small_grid, packet1):
    return gaussian_field(packet1, small_grid, 0.0)


class TestVelocityFields:
    """Test grid velocity fields of a packet."""

    def test_mask_excludes_the_tails(self, packet_field):
        mask = density_mask(packet_field)
        assert mask[packet_field.grid.nearest_index(400 * NM)]
        assert not mask[0] and not mask[-1]

    def test_bohm_velocity_is_the_group_velocity(self, packet_field, packet1):
        v = bohm_velocity(packet_field)
        assert np.all(np.isnan(v[~density_mask(packet_field)]))
        assert np.allclose(v[density_mask(packet_field)], packet1.v_c, rtol=1e-2)

    def test_osmotic_velocity_points_to_the_centre(self, packet_field, packet1):
        grid = packet_field.grid
        v_o = osmotic_velocity(packet_field)
        left = grid.nearest_index(packet1.x_c - 40 * NM)
        right = grid.nearest_index(packet1.x_c + 40 * NM)
        assert v_o[left] > 0 > v_o[right]
        expected = HBAR / EFFECTIVE_MASS * (40 * NM) / packet1.sigma_x**2
        assert v_o[left] == pytest.approx(expected, rel=1e-2)

    def test_quantum_potential_at_the_centre(self, packet_field, packet1):
        q = quantum_potential(packet_field)
        centre = packet_field.grid.nearest_index(packet1.x_c)
        assert q[centre] == pytest.approx(HBAR**2 / (2 * EFFECTIVE_MASS * packet1.sigma_x**2), rel=1e-2)


class TestTrajectory:
    """Test the trajectory container."""

    def test_times_must_increase(self):
        with pytest.raises(NumericalError):
            Trajectory(0, np.array([0.0, 1.0, 1.0]), np.zeros((3, 1)))

    def test_velocities_and_lookup(self):
        times = np.linspace(0.0, 1.0, 11)
        traj = Trajectory(3, times, (2.0 * times)[:, None])
        assert traj.ndim == 1
        assert np.allclose(traj.velocities(), 2.0)
        assert traj.position_at(0.52)[0] == pytest.approx(1.0)


class TestIntegration:
    """Test ensemble integration against known flows."""

    def test_frozen_field_moves_at_constant_speed(self, packet_field, packet1):
        source = FieldVelocitySource([packet_field])
        traj = integrate_trajectory([packet1.x_c], source, 0.0, 1e-14, 1e-15, seed=7)
        assert traj.seed == 7
        assert traj.positions[-1, 0] - packet1.x_c == pytest.approx(packet1.v_c * 1e-14, rel=1e-2)

    def test_propagated_field_guides_the_centre(self, small_grid, packet1, free_space):
        pair = seed_pair(packet1, small_grid, 0.0, free_space)
        source = PropagatedVelocitySource(pair, free_space)
        duration = 200 * small_grid.dt
        [traj] = integrate_ensemble(np.array([packet1.x_c]), source, pair.t, pair.t + duration, 10 * small_grid.dt)
        assert len(traj.times) == 21
        assert traj.positions[-1, 0] - packet1.x_c == pytest.approx(packet1.v_c * duration, rel=1e-2)

    def test_propagated_source_refuses_going_back(self, small_grid, packet1, free_space):
        source = PropagatedVelocitySource(seed_pair(packet1, small_grid, 0.0, free_space), free_space)
        source.snapshot_at(10 * small_grid.dt)
        with pytest.raises(NumericalError):
            source.snapshot_at(0.0)

    def test_lost_trajectory(self, packet_field):
        source = FieldVelocitySource([packet_field])
        starts = np.array([400 * NM, 1050 * NM])
        with pytest.raises(TrajectoryLost):
            integrate_ensemble(starts, source, 0.0, 1e-14, 1e-15)
        trajs = integrate_ensemble(starts, source, 0.0, 1e-14, 1e-15, drop_lost=True)
        assert trajs[1].positions[-1, 0] == pytest.approx(1050 * NM)
        assert trajs[0].positions[-1, 0] > 400 * NM

    def test_window_shorter_than_a_step(self, packet_field):
        with pytest.raises(NumericalError):
            integrate_ensemble(np.array([400 * NM]), FieldVelocitySource([packet_field]), 0.0, 1e-16, 1e-15)


class TestSampling:
    """Test Born-rule sampling of initial positions."""

    def test_seed_determines_the_draw(self, packet_field):
        a = sample_initial_positions(packet_field, 50, seed=11)
        b = sample_initial_positions(packet_field, 50, seed=11)
        assert a.shape == (50, 1)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, sample_initial_positions(packet_field, 50, seed=12))

    def test_samples_follow_the_density(self, packet_field, packet1):
        samples = sample_initial_positions(packet_field, 2000, seed=3)
        assert abs(samples.mean() - packet1.x_c) < 6 * NM
        assert ks_distance(samples, packet_field) < 0.06

    def test_two_dimensional_draw(self, landau_params, landau_grid):
        psi, _ = landau_superposition(landau_params, landau_grid)
        samples = sample_initial_positions(psi, 20, seed=5)
        x, y = landau_grid.axes()
        assert samples.shape == (20, 2)
        assert np.all((samples[:, 0] >= x[0]) & (samples[:, 0] <= x[-1]))
        assert np.all((samples[:, 1] >= y[0]) & (samples[:, 1] <= y[-1]))

    @pytest.mark.slow
    def test_ensemble_stays_distributed_as_the_density(self, packet1, free_space):
        grid = Grid1D.spanning(-300 * NM, 1400 * NM, 0.5 * NM, 0.05 * FS)
        pair = seed_pair(packet1, grid, 0.0, free_space)
        starts = sample_initial_positions(pair.cur, 10_000, seed=21)
        source = PropagatedVelocitySource(pair, free_space)
        t_end = pair.t + 1e-12
        trajs = integrate_ensemble(starts, source, pair.t, t_end, 5e-15, drop_lost=True)
        finals = np.array([traj.positions[-1, 0] for traj in trajs])
        assert ks_distance(finals, source.snapshot_at(t_end)) < 0.02


class TestLandauFlow:
    """Test closed-form velocities of Landau superpositions."""

    def test_transverse_velocity(self, landau_params, landau_grid):
        _, basis = landau_superposition(landau_params, landau_grid)
        source = LandauVelocitySource(LandauState(basis))
        x = landau_params.center + 100 * NM
        v = source.velocity(0.0, np.array([[x, 0.0]]))
        expected = (HBAR * landau_params.k_y - CHARGE * landau_params.magnetic_field * x) / EFFECTIVE_MASS
        assert v[0, 1] == pytest.approx(expected, rel=1e-9)

    def test_far_points_are_masked(self, landau_params, landau_grid):
        _, basis = landau_superposition(landau_params, landau_grid)
        source = LandauVelocitySource(LandauState(basis))
        assert np.all(np.isnan(source.velocity(0.0, np.array([[2000 * NM, 0.0]]))))


class TestOscillationPeriod:
    """Test the mean-crossing period estimator."""

    def test_sine(self):
        times = np.linspace(0.0, 50.0, 5001)
        assert oscillation_period(times, 3.0 + np.sin(2 * math.pi * times / 7.0)) == pytest.approx(7.0, rel=1e-3)

    def test_needs_two_crossings(self):
        times = np.linspace(0.0, 1.0, 10)
        with pytest.raises(NumericalError):
            oscillation_period(times, times)
