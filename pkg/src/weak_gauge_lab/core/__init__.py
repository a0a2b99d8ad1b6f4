"""
Numerical core of Weak Gauge Lab.

Grids and fields, gauge functions, prepared states, the gauged propagator,
operators, weak-value evaluation, Bohmian trajectories and field sensing.
The scenario orchestrator lives in ``core.laboratory`` and is imported from
there.
"""

from .fields import Grid1D, Grid2D, WaveField
from .gauge import EmScenario, GaugeSpec, TabulatedGauge, apply_gauge
from .states import PacketParams, LandauParams, reference_packet
from .propagator import StatePair, Stepper, LandauState
from .operators import OperatorSpec, OperatorKind, GaugeClass
from .weakeval import SelectionPair, WeakValueEvaluator, DerivativeEstimate
from .bohmian import Trajectory, integrate_ensemble
from .sensing import SensorReading, estimate_E, estimate_B

__all__ = [
    "Grid1D",
    "Grid2D",
    "WaveField",
    "EmScenario",
    "GaugeSpec",
    "TabulatedGauge",
    "apply_gauge",
    "PacketParams",
    "LandauParams",
    "reference_packet",
    "StatePair",
    "Stepper",
    "LandauState",
    "OperatorSpec",
    "OperatorKind",
    "GaugeClass",
    "SelectionPair",
    "WeakValueEvaluator",
    "DerivativeEstimate",
    "Trajectory",
    "integrate_ensemble",
    "SensorReading",
    "estimate_E",
    "estimate_B",
]
