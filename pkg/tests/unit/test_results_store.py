"""
Tests for the results store.
"""

import json

import numpy as np
import pytest

from weak_gauge_lab.core.bohmian import Trajectory
from weak_gauge_lab.core.sensing import SensorReading
from weak_gauge_lab.data import results_store
from weak_gauge_lab.data.results_store import DerivativeRow, ResultsStore, WeakValueRow
from weak_gauge_lab.utils.exceptions import ConfigurationError, ResultsStoreError


def _lines(path):
    return path.read_text(encoding="utf-8").splitlines()


@pytest.fixture
def store(tmp_path) -> ResultsStore:
    return ResultsStore(tmp_path / "out")


@pytest.fixture
def fake_host(mocker):
    return mocker.patch.object(results_store, "host_info", return_value={"cpu": "test-cpu", "logical_cores": 2})


class TestTables:
    """Test the CSV tables."""

    def test_derivatives(self, store):
        path = store.write_derivatives([DerivativeRow(0.5, 1e-16, 2.0e5, -1.0, 2.1e5, 0.0, False)])
        header, row = _lines(path)
        assert header == "theta_rad,stride_s,fdlhd_m_per_s,fdrhd_m_per_s,lhd_m_per_s,rhd_m_per_s,flagged"
        assert row.split(",")[0] == "5.000000000000e-01"
        assert row.split(",")[2] == "2.000000000000e+05"
        assert row.endswith(",0")

    def test_trajectories_one_dimensional(self, store):
        times = np.array([0.0, 1e-15])
        trajs = [Trajectory(i, times, np.array([[i * 1e-9], [i * 1e-9 + 1e-10]])) for i in range(2)]
        lines = _lines(store.write_trajectories(trajs))
        assert lines[0] == "traj_id,t_s,x_m"
        assert len(lines) == 5
        assert lines[3].startswith("1,")

    def test_trajectories_two_dimensional(self, store):
        traj = Trajectory(0, np.array([0.0, 1e-15]), np.zeros((2, 2)))
        assert _lines(store.write_trajectories([traj]))[0] == "traj_id,t_s,x_m,y_m"

    def test_sensor_rows_are_time_ordered(self, store):
        readings = [
            SensorReading(0, 2e-14, (1e-7,), -1e6, "V/m", False),
            SensorReading(1, 1e-14, (2e-7,), float("nan"), "V/m", True),
            SensorReading(0, 1e-14, (3e-7,), -9.9e5, "V/m", False),
        ]
        lines = _lines(store.write_sensor(readings))
        assert lines[0] == "t_s,x_m,estimate,unit,flagged"
        assert lines[1].startswith("1.000000000000e-14,3.000000000000e-07")
        assert lines[2].endswith("V/m,1")
        assert lines[3].startswith("2.000000000000e-14")

    def test_weak_values(self, store):
        rows = [WeakValueRow(3, 1e-14, (1e-7, 2e-8), "velocity-y", complex(2.0, -0.5), False)]
        header, row = _lines(store.write_weak_values(rows))
        assert header == "traj_id,t_s,x_m,y_m,observable,value_real,value_imag,flagged"
        fields = row.split(",")
        assert fields[0] == "3"
        assert fields[4] == "velocity-y"
        assert fields[6] == "-5.000000000000e-01"

    def test_written_files_are_tracked(self, store):
        store.write_derivatives([])
        assert store.written == ["derivatives.csv"]

    def test_unwritable_directory(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("", encoding="utf-8")
        with pytest.raises(ResultsStoreError):
            ResultsStore(blocker / "out").write_derivatives([])


class TestManifest:
    """Test the plain-text run manifest."""

    def test_sections(self, store, fake_host):
        store.write_derivatives([])
        path = store.write_manifest(
            {"run": {"seed": 7}}, ["PASS norm_drift: ok"], norm_drift=1.5e-6, extra={"kind": "delocalized"}
        )
        text = path.read_text(encoding="utf-8")
        for section in ("[constants]", "[config]", "[host]", "[run]", "[acceptance]"):
            assert section in text
        assert "run.seed = 7" in text
        assert "cpu = test-cpu" in text
        assert "norm_drift = 1.500000e-06" in text
        assert "files = derivatives.csv" in text
        assert text.rstrip().endswith("PASS norm_drift: ok")
        fake_host.assert_called_once()


class TestErrorRecord:
    """Test the machine-readable error record."""

    def test_configuration_error(self, store):
        error = ConfigurationError("Unknown key", key_path="grid.dx", line=4)
        record = json.loads(store.write_error(error.to_record()).read_text(encoding="utf-8"))
        assert record == {
            "type": "ConfigurationError",
            "message": "Unknown key",
            "details": None,
            "line": 4,
            "key_path": "grid.dx",
        }
