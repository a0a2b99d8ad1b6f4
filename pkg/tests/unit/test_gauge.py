"""
Tests for gauge functions and electromagnetic scenarios.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weak_gauge_lab.constants import NM
from weak_gauge_lab.core.fields import Grid1D, l2_distance, norm
from weak_gauge_lab.core.gauge import (
    EmScenario,
    GaugeSpec,
    TabulatedGauge,
    apply_gauge,
    default_thetas,
    derivative_consistency,
    theta_spread,
    theta_sweep,
    transform_potentials,
)
from weak_gauge_lab.core.states import gaussian_field, reference_packet
from weak_gauge_lab.utils.exceptions import ConfigurationError, GaugeMixing


class TestGaugeSpec:
    """Test the cosine gauge family."""

    def test_analytic_derivatives_match_differences(self):
        x = np.linspace(-500 * NM, 500 * NM, 101)
        assert derivative_consistency(GaugeSpec(theta=0.4), x, 3e-14, 1e-11, 1e-18) < 1e-6

    def test_tag_distinguishes_phases(self):
        assert GaugeSpec(theta=0.0).tag != GaugeSpec(theta=0.1).tag

    def test_negated(self):
        g = GaugeSpec(theta=1.0)
        x = np.array([0.0, 1e-7])
        assert np.allclose(g.negated().value(x, 0.0), -g.value(x, 0.0))

    def test_theta_sweep_uses_reference_parameters(self):
        gauges = theta_sweep(default_thetas(4))
        assert [g.theta for g in gauges] == pytest.approx([0.0, math.pi / 2, math.pi, 3 * math.pi / 2])
        assert all(g.g0 == 1e-14 and g.kg == 8e6 and g.wg == 1e13 for g in gauges)

    def test_default_thetas_rejects_zero(self):
        with pytest.raises(ConfigurationError):
            default_thetas(0)

    def test_theta_spread(self):
        assert theta_spread([1.0, 3.0, 2.0]) == 2.0


class TestApplyGauge:
    """Test gauge transformations of fields."""

    def test_round_trip(self, small_grid, packet1, gauge):
        psi = gaussian_field(packet1, small_grid, 0.0)
        back = apply_gauge(apply_gauge(psi, gauge), gauge, inverse=True)
        assert back.gauge is None
        assert l2_distance(back, psi) < 1e-12

    def test_refuses_double_transform(self, small_grid, packet1, gauge):
        gauged = apply_gauge(gaussian_field(packet1, small_grid, 0.0), gauge)
        with pytest.raises(GaugeMixing):
            apply_gauge(gauged, gauge)

    def test_refuses_stripping_another_gauge(self, small_grid, packet1, gauge):
        gauged = apply_gauge(gaussian_field(packet1, small_grid, 0.0), gauge)
        with pytest.raises(GaugeMixing):
            apply_gauge(gauged, GaugeSpec(theta=2.0), inverse=True)

    @settings(max_examples=20, deadline=None)
    @given(theta=st.floats(0.0, 2 * math.pi), t=st.floats(0.0, 1e-12))
    def test_transform_is_unitary(self, theta, t):
        grid = Grid1D.spanning(-300 * NM, 1100 * NM, 1.0 * NM, 1e-16)
        psi = gaussian_field(reference_packet("packet1"), grid, t)
        assert norm(apply_gauge(psi, GaugeSpec(theta=theta))) == pytest.approx(1.0, abs=1e-12)


class TestEmScenario:
    """Test potentials and fields of the scenario kinds."""

    def test_uniform_field_is_gauge_invariant(self, gauge):
        x = np.linspace(0.0, 1e-6, 50)
        em = EmScenario.uniform_electric(-1e6)
        assert np.allclose(em.electric((x,), 1e-14), -1e6)
        assert np.allclose(em.transformed(gauge).electric((x,), 1e-14), -1e6, rtol=1e-9)

    def test_coulomb_potentials(self):
        x = np.array([0.0, 1e-7])
        em = EmScenario.uniform_electric(2.0)
        assert np.allclose(em.scalar_potential((x,), 0.0), [0.0, -2e-7])
        assert np.allclose(em.vector_potential((x,), 0.0), 0.0)

    def test_gauge_adds_gradient_to_vector_potential(self, gauge):
        x = np.linspace(0.0, 1e-6, 7)
        em = transform_potentials(EmScenario.free(), gauge)
        assert np.allclose(em.vector_potential((x,), 1e-14), gauge.d_x(x, 1e-14))
        assert np.allclose(em.scalar_potential((x,), 1e-14), -gauge.d_t(x, 1e-14))
        assert em.gauge_tag == gauge.tag
        assert em.coulomb.gauge_tag is None

    def test_describe(self, gauge):
        assert EmScenario.uniform_electric(-1e6).describe() == "uniform-E, E=-1e+06 V/m"
        assert EmScenario.landau(0.19).describe() == "landau-B, B=0.19 T"
        assert EmScenario.free().transformed(gauge).describe().startswith("free, gauge=")

    def test_landau_magnetic_field(self):
        x = np.linspace(-1e-7, 1e-7, 5)[:, None]
        y = np.linspace(-1e-8, 1e-8, 3)[None, :]
        em = EmScenario.landau(0.19)
        assert np.allclose(em.magnetic((x, y), 0.0), 0.19)
        assert np.allclose(em.vector_potential((x, y), 0.0, axis=1), 0.19 * x * np.ones_like(y))


class TestTabulatedGauge:
    """Test tabulated gauge functions."""

    def _tables(self):
        spec = GaugeSpec(theta=0.3)
        t = np.linspace(0.0, 1e-13, 21)
        x = np.linspace(-300 * NM, 1100 * NM, 401)
        tt, xx = np.meshgrid(t, x, indexing="ij")
        return spec, t, x, {
            "g": spec.value(xx, tt),
            "g_x": spec.d_x(xx, tt),
            "g_xx": spec.d_xx(xx, tt),
            "g_t": spec.d_t(xx, tt),
        }

    def test_interpolates_the_samples(self):
        spec, t, x, tables = self._tables()
        tab = TabulatedGauge("cos", t, x, **tables)
        points = np.linspace(0.0, 1000 * NM, 17)
        assert np.allclose(tab.value(points, 5e-14), spec.value(points, 5e-14), atol=1e-3 * spec.g0)

    def test_from_npz(self, tmp_path):
        _, t, x, tables = self._tables()
        path = tmp_path / "gauge.npz"
        np.savez(path, t=t, x=x, **tables)
        tab = TabulatedGauge.from_npz(path)
        assert tab.tag == "table(gauge)"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            TabulatedGauge.from_npz(tmp_path / "absent.npz")

    def test_shape_mismatch(self):
        _, t, x, tables = self._tables()
        tables["g_t"] = tables["g_t"][:, :-1]
        with pytest.raises(ConfigurationError):
            TabulatedGauge("bad", t, x, **tables)
