"""
Tests for the finite-difference stepper and the spectral Landau evolution.
"""

import math

import numpy as np
import pytest

from weak_gauge_lab.constants import FS, NM
from weak_gauge_lab.core.fields import Grid1D, l2_distance, norm
from weak_gauge_lab.core.gauge import EmScenario, GaugeSpec, apply_gauge
from weak_gauge_lab.core.operators import IDENTITY, KINETIC_ENERGY, POSITION, POSITION_Y, VELOCITY, VELOCITY_Y
from weak_gauge_lab.core.propagator import (
    FieldPreparation,
    GaugedScheme,
    LandauState,
    PacketPreparation,
    PairPreparation,
    StepLog,
    StatePair,
    Stepper,
    check_stability,
    cyclotron_image,
    evolve,
    evolve_applied,
    landau_evolve,
    seed_pair,
    stability_coefficient,
    step_coulomb,
    step_gauged,
)
from weak_gauge_lab.core.states import gaussian_field, landau_superposition
from weak_gauge_lab.utils.exceptions import (
    BoundaryLeak,
    GaugeMixing,
    GridError,
    GridMismatch,
    UnstableStep,
    UnsupportedOperator,
)


class TestStability:
    """Test the explicit-scheme stability bound."""

    def test_default_mesh_is_stable(self):
        grid = Grid1D.spanning(-800 * NM, 1600 * NM, 0.2 * NM, 0.01 * FS)
        assert stability_coefficient(grid) < 0.5
        assert check_stability(grid) == pytest.approx(stability_coefficient(grid))

    def test_large_step_is_rejected(self):
        with pytest.raises(UnstableStep):
            check_stability(Grid1D.spanning(0.0, 100 * NM, 0.2 * NM, 1 * FS))

    def test_unstable_evolution_raises(self, packet1):
        grid = Grid1D.spanning(-300 * NM, 1100 * NM, 0.5 * NM, 1 * FS)
        em = EmScenario.free()
        with pytest.raises(UnstableStep):
            Stepper(em).evolve(seed_pair(packet1, grid, 0.0, em), 10 * grid.dt)


class TestStatePair:
    """Test the two-snapshot container."""

    def test_spacing_must_equal_dt(self, small_grid, packet1):
        first = gaussian_field(packet1, small_grid, 0.0)
        with pytest.raises(GridMismatch):
            StatePair(first, first)

    def test_gauges_must_agree(self, small_grid, packet1, gauge):
        pair = seed_pair(packet1, small_grid, 0.0, EmScenario.free())
        with pytest.raises(GaugeMixing):
            StatePair(pair.prev, apply_gauge(pair.cur, gauge))

    def test_seed_pair_in_gauge(self, small_grid, packet1, gauge):
        pair = seed_pair(packet1, small_grid, 0.0, EmScenario.free(), gauge)
        assert pair.gauge is gauge
        assert pair.t == pytest.approx(small_grid.dt)


class TestStepper:
    """Test the three-level finite-difference stepper."""

    def test_norm_is_conserved(self, small_grid, packet1, free_space):
        log = StepLog()
        pair = seed_pair(packet1, small_grid, 0.0, free_space)
        Stepper(free_space, log=log, check_every=20).evolve(pair, 200 * small_grid.dt)
        assert len(log.records) == 11
        assert log.norm_drift < 1e-4
        assert log.max_boundary < 1e-6

    def test_matches_closed_form(self, small_grid, packet1, free_space):
        pair = Stepper(free_space).evolve(seed_pair(packet1, small_grid, 0.0, free_space), 200 * small_grid.dt)
        exact = gaussian_field(packet1, small_grid, pair.t, elapsed=pair.t)
        assert l2_distance(pair.cur, exact, align_phase=True) < 1e-3

    def test_single_step_agrees_with_stencil_form(self, small_grid, packet1):
        em = EmScenario.uniform_electric(-1e6)
        pair = seed_pair(packet1, small_grid, 0.0, em)
        a = Stepper(em).step(pair)
        b = step_coulomb(pair, em)
        assert np.allclose(a.amplitudes, b.amplitudes, atol=1e-12 * np.max(np.abs(b.amplitudes)))

    def test_step_gauged_matches_the_stepper(self, small_grid, packet1, free_space, gauge):
        pair = seed_pair(packet1, small_grid, 0.0, free_space, gauge)
        a = step_gauged(pair, free_space, gauge)
        b = Stepper(free_space, gauge).step(pair)
        assert np.array_equal(a.amplitudes, b.amplitudes)
        with pytest.raises(GaugeMixing):
            step_gauged(seed_pair(packet1, small_grid, 0.0, free_space), free_space, gauge)

    def test_zero_duration_returns_input(self, small_grid, packet1, free_space):
        pair = seed_pair(packet1, small_grid, 0.0, free_space)
        assert Stepper(free_space).evolve(pair, 0.0) is pair

    def test_duration_must_be_whole_steps(self, small_grid, packet1, free_space):
        pair = seed_pair(packet1, small_grid, 0.0, free_space)
        with pytest.raises(GridError):
            Stepper(free_space).evolve(pair, 1.5 * small_grid.dt)

    def test_gauge_mismatch(self, small_grid, packet1, free_space, gauge):
        pair = seed_pair(packet1, small_grid, 0.0, free_space, gauge)
        with pytest.raises(GaugeMixing):
            Stepper(free_space).evolve(pair, small_grid.dt)

    def test_boundary_leak(self, small_grid, packet1, free_space):
        pair = seed_pair(packet1, small_grid, 0.0, free_space)
        with pytest.raises(BoundaryLeak):
            Stepper(free_space, leak_tolerance=1e-30).evolve(pair, small_grid.dt)

    def test_magnetic_scenario_is_spectral(self):
        with pytest.raises(UnsupportedOperator):
            Stepper(EmScenario.landau(0.19))

    @pytest.mark.parametrize("scheme", [GaugedScheme.EXPANDED, GaugedScheme.PEIERLS])
    def test_gauged_evolution_is_covariant(self, small_grid, packet1, free_space, scheme):
        gauge = GaugeSpec(g0=1e-15, theta=0.7)
        duration = 100 * small_grid.dt
        coulomb = Stepper(free_space).evolve(seed_pair(packet1, small_grid, 0.0, free_space), duration)
        gauged = Stepper(free_space, gauge, scheme).evolve(
            seed_pair(packet1, small_grid, 0.0, free_space, gauge), duration
        )
        assert l2_distance(apply_gauge(gauged.cur, gauge, inverse=True), coulomb.cur) < 5e-2

    def test_functional_form_matches_the_stepper(self, small_grid, packet1, gauge, free_space):
        pair = seed_pair(packet1, small_grid, 0.0, free_space, gauge)
        a = evolve(pair, free_space, gauge, 20 * small_grid.dt)
        b = Stepper(free_space, gauge).evolve(pair, 20 * small_grid.dt)
        assert np.array_equal(a.cur.amplitudes, b.cur.amplitudes)

    def test_evolve_applied(self, small_grid, packet1, free_space):
        psi = gaussian_field(packet1, small_grid, 0.0)
        at_once = evolve_applied(POSITION, psi, free_space, None, 0.0)
        assert np.allclose(at_once.amplitudes, small_grid.x * psi.amplitudes)
        later = evolve_applied(IDENTITY, psi, free_space, None, 100 * small_grid.dt)
        exact = gaussian_field(packet1, small_grid, later.t, elapsed=later.t)
        assert later.t == pytest.approx(100 * small_grid.dt)
        assert l2_distance(later, exact, align_phase=True) < 1e-3

    def test_bootstrap_reproduces_the_history(self, small_grid, packet1, free_space):
        pair = seed_pair(packet1, small_grid, 0.0, free_space)
        rebuilt = Stepper(free_space).bootstrap(pair.cur)
        assert rebuilt.prev.t == pytest.approx(pair.prev.t)
        assert l2_distance(rebuilt.prev, pair.prev) < 1e-6


class TestPreparations:
    """Test the pre-selection recipes."""

    def test_packet_preparation(self, small_grid, packet1, free_space):
        prep = PacketPreparation(packet1, small_grid, t0=1 * FS)
        assert prep.pair(free_space, None).t == pytest.approx(1 * FS)

    def test_pair_preparation_in_gauge(self, small_grid, packet1, free_space, gauge):
        pair = seed_pair(packet1, small_grid, 0.0, free_space)
        prep = PairPreparation(pair)
        assert prep.pair(free_space, None) is pair
        gauged = prep.pair(free_space, gauge)
        assert gauged.gauge is gauge
        assert prep.t0 == pytest.approx(pair.t)

    def test_pair_preparation_needs_coulomb(self, small_grid, packet1, free_space, gauge):
        with pytest.raises(GaugeMixing):
            PairPreparation(seed_pair(packet1, small_grid, 0.0, free_space, gauge))

    def test_field_preparation(self, small_grid, packet1, free_space):
        psi = gaussian_field(packet1, small_grid, 0.0)
        pair = FieldPreparation(psi).pair(free_space, None)
        assert pair.cur is psi
        assert pair.prev.t == pytest.approx(-small_grid.dt)


class TestLandauEvolution:
    """Test the spectral evolution of Landau superpositions."""

    def test_norm_is_constant(self, landau_params, landau_grid):
        _, basis = landau_superposition(landau_params, landau_grid)
        state = LandauState(basis)
        assert norm(landau_evolve(state, 3e-12)) == pytest.approx(1.0, abs=1e-9)

    def test_period_returns_the_density(self, landau_params, landau_grid):
        _, basis = landau_superposition(landau_params, landau_grid)
        state = LandauState(basis)
        start = state.field(0.0).density
        later = state.field(landau_params.period).density
        assert np.allclose(start, later, atol=1e-9 * start.max())

    def test_rebased_state_continues_the_evolution(self, landau_params, landau_grid):
        _, basis = landau_superposition(landau_params, landau_grid)
        state = LandauState(basis)
        rebased = state.rebased(2e-12)
        assert rebased.t0 == 2e-12
        assert np.allclose(rebased.coeffs(5e-12), state.coeffs(5e-12))

    def test_negative_time(self, landau_params, landau_grid):
        _, basis = landau_superposition(landau_params, landau_grid)
        with pytest.raises(GridError):
            landau_evolve(LandauState(basis), -1.0)

    def test_applied_identity_ratio_is_one(self, landau_params, landau_grid):
        _, basis = landau_superposition(landau_params, landau_grid)
        ratio, _ = LandauState(basis).applied_ratio(IDENTITY, np.array([0.0]), np.array([0.0]), 0.0, 1e-13)
        assert ratio[0] == pytest.approx(1.0)


class TestCyclotronImage:
    """Test the closed-form Heisenberg images of the cyclotron motion."""

    def test_identity_at_zero_interval(self):
        assert cyclotron_image(POSITION, -5e11, 0.0) == (1.0, 0.0, 0.0, 0.0, 0.0)
        assert cyclotron_image(VELOCITY, -5e11, 0.0) == (0.0, 0.0, 1.0, 0.0, 0.0)

    def test_velocity_rotates_back_after_a_period(self):
        w = -5e11
        period = 2 * math.pi / abs(w)
        c_vx, c_vy = cyclotron_image(VELOCITY_Y, w, period)[2:4]
        assert c_vx == pytest.approx(0.0, abs=1e-9)
        assert c_vy == pytest.approx(1.0)

    def test_position_derivative_is_velocity(self):
        w, s = -5e11, 1e-16
        _, _, c_vx, c_vy, _ = cyclotron_image(POSITION_Y, w, s)
        assert c_vy / s == pytest.approx(1.0, rel=1e-3)
        assert abs(c_vx / s) < 1e-3

    def test_unsupported(self):
        with pytest.raises(UnsupportedOperator):
            cyclotron_image(KINETIC_ENERGY, -5e11, 1e-15)
