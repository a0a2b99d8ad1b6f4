"""
Tests for packets and Landau states.
"""

import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from weak_gauge_lab.constants import FS, MEV, NM
from weak_gauge_lab.core.fields import Grid1D, Grid2D, norm
from weak_gauge_lab.core.states import (
    LandauParams,
    PacketParams,
    gaussian_field,
    gaussian_pair,
    hermite_functions,
    landau_eigenstate,
    landau_superposition,
    reference_packet,
)
from weak_gauge_lab.utils.exceptions import BoxTooSmall, StateError, UnknownState


def _mean_position(psi):
    return float(np.sum(psi.grid.x * psi.density) * psi.grid.dx)


class TestReferencePackets:
    """Test the packet registry."""

    def test_packet1_velocity(self):
        assert reference_packet("packet1").v_c == pytest.approx(2.29e5, rel=0.01)

    def test_lab_units(self):
        p = reference_packet("packet5")
        assert p.energy == pytest.approx(50 * MEV)
        assert p.x_c == pytest.approx(200 * NM)
        assert p.sigma_x == pytest.approx(127 * NM)

    def test_lookup_is_case_insensitive(self):
        assert reference_packet(" Packet3 ") == reference_packet("packet3")

    def test_unknown_packet(self):
        with pytest.raises(UnknownState):
            reference_packet("packet9")

    def test_invalid_parameters(self):
        with pytest.raises(StateError):
            PacketParams(-1.0, 0.0, 1e-9)
        with pytest.raises(StateError):
            PacketParams(1e-21, 0.0, 0.0)


class TestGaussianField:
    """Test the closed-form Gaussian packet."""

    def test_centre_moves_at_group_velocity(self, small_grid, packet1):
        elapsed = 50 * FS
        psi = gaussian_field(packet1, small_grid, elapsed, elapsed=elapsed)
        assert _mean_position(psi) == pytest.approx(packet1.x_c + packet1.v_c * elapsed, rel=1e-6)

    def test_width_grows(self, small_grid, packet2):
        early = gaussian_field(packet2, small_grid, 0.0)
        late = gaussian_field(packet2, small_grid, 100 * FS, elapsed=100 * FS)
        assert np.max(late.density) < np.max(early.density)

    def test_box_too_small(self, packet1):
        grid = Grid1D.spanning(0.0, 800 * NM, 1 * NM, 0.05 * FS)
        with pytest.raises(BoxTooSmall) as info:
            gaussian_field(packet1, grid, 0.0)
        assert info.value.boundary_amplitude > 1e-10

    def test_pair_is_one_step_apart(self, small_grid, packet1):
        first, second = gaussian_pair(packet1, small_grid, 2 * FS)
        assert first.t == pytest.approx(2 * FS)
        assert second.t - first.t == pytest.approx(small_grid.dt)
        assert norm(second) == pytest.approx(1.0, abs=1e-12)


class TestHermiteFunctions:
    """Test the normalized Hermite recurrence."""

    def test_orthonormal(self):
        xi = np.linspace(-15.0, 15.0, 6001)
        funcs = hermite_functions(10, xi)
        gram = trapezoid(funcs[:, None, :] * funcs[None, :, :], xi, axis=-1)
        assert np.allclose(gram, np.eye(10), atol=1e-8)

    def test_finite_far_out(self):
        assert np.all(np.isfinite(hermite_functions(10, np.array([60.0, -60.0]))))


class TestLandau:
    """Test Landau-level parameters and states."""

    def test_period(self, landau_params):
        assert landau_params.period == pytest.approx(12.6e-12, rel=0.01)
        assert landau_params.omega_b == pytest.approx(0.49e12, rel=0.03)

    def test_centre_sign(self, landau_params):
        assert landau_params.center == pytest.approx(-landau_params.x_y)
        assert landau_params.cyclotron < 0

    def test_weights_are_normalized(self):
        lp = LandauParams(0.19, 1e7, 3, coeffs=(1.0, 1.0j, 0.0))
        assert sum(abs(c) ** 2 for c in lp.coeffs) == pytest.approx(1.0)

    def test_invalid_weights(self):
        with pytest.raises(StateError):
            LandauParams(0.19, 1e7, 2, coeffs=(0.0, 0.0))
        with pytest.raises(StateError):
            LandauParams(0.19, 1e7, 3, coeffs=(1.0, 0.0))
        with pytest.raises(StateError):
            LandauParams(-0.19, 1e7)

    def test_superposition_is_normalized(self, landau_params, landau_grid):
        psi, basis = landau_superposition(landau_params, landau_grid)
        assert norm(psi) == pytest.approx(1.0, abs=1e-9)
        assert basis.profiles.shape == (10, landau_grid.x_axis.nx)

    def test_eigenstate_density_is_uniform_in_y(self, landau_params, landau_grid):
        psi = landau_eigenstate(3, landau_params, landau_grid)
        density = psi.density
        assert np.allclose(density, density[:, :1])

    def test_level_out_of_range(self, landau_params, landau_grid):
        with pytest.raises(StateError):
            landau_eigenstate(10, landau_params, landau_grid)

    def test_box_too_small(self, landau_params):
        grid = Grid2D.spanning((-300 * NM, 300 * NM), (-20 * NM, 20 * NM), 2 * NM, 2 * NM, 0.05 * FS)
        with pytest.raises(BoxTooSmall):
            landau_superposition(landau_params, grid)

    def test_level_energies(self, landau_params):
        spacing = np.diff(landau_params.energies)
        assert np.allclose(spacing, landau_params.energy(1) - landau_params.energy(0))
        assert math.isclose(landau_params.energies[0], landau_params.energy(0))
