"""
Shared fixtures for the Weak Gauge Lab test suite.

Grids here are coarser and smaller than the production defaults so the unit
suite stays fast; the reference-scale checks live behind the ``slow`` marker.
"""

import pytest

from weak_gauge_lab.constants import FS, NM
from weak_gauge_lab.core.fields import Grid1D, Grid2D
from weak_gauge_lab.core.gauge import EmScenario, GaugeSpec
from weak_gauge_lab.core.states import LandauParams, reference_packet
from weak_gauge_lab.utils.config import GridSettings, ScenarioConfig


@pytest.fixture
def small_grid() -> Grid1D:
    """[-300, 1100] nm at 0.5 nm and 0.05 fs; fits packets 1 to 4."""
    return Grid1D.spanning(-300 * NM, 1100 * NM, 0.5 * NM, 0.05 * FS)


@pytest.fixture
def landau_grid() -> Grid2D:
    """Full x extent of ten Landau levels with a short y strip."""
    return Grid2D.spanning((-700 * NM, 700 * NM), (-40 * NM, 40 * NM), 2 * NM, 2 * NM, 0.05 * FS)


@pytest.fixture
def packet1():
    return reference_packet("packet1")


@pytest.fixture
def packet2():
    return reference_packet("packet2")


@pytest.fixture
def free_space() -> EmScenario:
    return EmScenario.free()


@pytest.fixture
def gauge() -> GaugeSpec:
    return GaugeSpec(theta=0.7)


@pytest.fixture
def landau_params() -> LandauParams:
    return LandauParams.from_lab_units(0.19, 0.0118, 10)


@pytest.fixture
def small_config() -> ScenarioConfig:
    """Default scenario moved onto the small grid."""
    return ScenarioConfig(grid=GridSettings(dx=0.5 * NM, dt=0.05 * FS, x_min=-300 * NM, x_max=1100 * NM))
