"""
Scenario orchestration for Weak Gauge Lab.

This module turns a validated ScenarioConfig into states, scenarios and gauges,
runs the derivative sweep or one of the two sensing runs, writes the result
tables through a ResultsStore and evaluates the acceptance checks.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..data.results_store import DerivativeRow, ResultsStore, WeakValueRow
from ..utils.config import ScenarioConfig, ScenarioKind
from ..utils.exceptions import ConfigurationError, NumericalError, StateError
from ..utils.logger import PerformanceTimer, get_logger
from .bohmian import (
    LandauVelocitySource,
    PropagatedVelocitySource,
    Trajectory,
    integrate_ensemble,
    oscillation_period,
    sample_initial_positions,
)
from .fields import Grid1D, Grid2D, WaveField, normalize
from .gauge import EmScenario, GaugeFunction, GaugeSpec, TabulatedGauge, default_thetas, theta_spread
from .operators import OperatorSpec
from .propagator import (
    FieldPreparation,
    GaugedScheme,
    LandauState,
    PacketPreparation,
    Preparation,
    StepLog,
    Stepper,
    seed_pair,
)
from .sensing import (
    KineticRoute,
    SensorReading,
    estimate_B,
    estimate_E,
    reading_points,
    reading_spread,
    summarize_readings,
)
from .states import LandauParams, PacketParams, landau_superposition, reference_packet
from .weakeval import PacketPost, SelectionPair, fdlhd, fdrhd, lhd, rhd, stride_convergence

NORM_DRIFT_LIMIT = 1e-4


class CheckStatus(Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    EXPECTED = "EXPECTED"
    INFO = "INFO"


@dataclass(frozen=True)
class CheckLine:
    """One acceptance or self-check outcome, printed as ``STATUS name: message``."""
    name: str
    status: CheckStatus
    message: str

    def __str__(self) -> str:
        return f"{self.status.value} {self.name}: {self.message}"


def check(name: str, ok: bool, message: str, expected: bool = False) -> CheckLine:
    if ok:
        return CheckLine(name, CheckStatus.EXPECTED if expected else CheckStatus.PASS, message)
    return CheckLine(name, CheckStatus.FAIL, message)


@dataclass
class RunReport:
    kind: ScenarioKind
    checks: List[CheckLine] = field(default_factory=list)
    files: List[str] = field(default_factory=list)
    norm_drift: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(c.status is not CheckStatus.FAIL for c in self.checks)

    @property
    def lines(self) -> List[str]:
        return [str(c) for c in self.checks]


def build_grid(cfg: ScenarioConfig) -> Union[Grid1D, Grid2D]:
    g = cfg.grid
    if g.is_2d:
        return Grid2D.spanning((g.x_min, g.x_max), (g.y_min, g.y_max), g.dx, g.dy, g.dt)
    return Grid1D.spanning(g.x_min, g.x_max, g.dx, g.dt)


def build_scenario(cfg: ScenarioConfig) -> EmScenario:
    kind = cfg.run.kind
    if kind is ScenarioKind.BFIELD:
        return EmScenario.landau(cfg.states.magnetic_field)
    if cfg.states.electric_field != 0.0:
        return EmScenario.uniform_electric(cfg.states.electric_field)
    return EmScenario.free()


def build_gauges(cfg: ScenarioConfig) -> List[Tuple[float, GaugeFunction]]:
    """(theta, gauge) pairs; a tabulated gauge is reported with theta = nan."""
    g = cfg.gauge
    if g.table is not None:
        return [(float("nan"), TabulatedGauge.from_npz(g.table))]
    thetas = g.thetas if g.thetas is not None else default_thetas(g.theta_count)
    return [(float(theta), GaugeSpec(g.amplitude, g.wavenumber, g.frequency, float(theta))) for theta in thetas]


def resolve_packet(name: str, explicit: Optional[Tuple[float, float, float]], key_path: str) -> PacketParams:
    if explicit is not None:
        return PacketParams(*explicit)
    try:
        return reference_packet(name)
    except StateError as e:
        raise ConfigurationError(e.message, details=e.details, key_path=key_path)


def load_field(path: Path, grid: Grid1D) -> WaveField:
    """Complex amplitudes (Coulomb gauge) from a .npy file, normalized at t = 0."""
    try:
        data = np.load(path)
    except (OSError, ValueError) as e:
        raise ConfigurationError(f"Failed to load field: {e}", key_path="states.pre_field")
    if data.shape != grid.shape:
        raise ConfigurationError(
            f"Field shape {data.shape} does not match grid {grid.shape}", key_path="states.pre_field"
        )
    return normalize(WaveField(grid, data, 0.0))


@dataclass(frozen=True)
class ThetaTask:
    theta: float
    gauge: GaugeFunction
    pre: Preparation
    post: PacketPost
    em: EmScenario
    scheme: GaugedScheme
    op: OperatorSpec
    strides: Tuple[float, ...]


def sweep_theta(task: ThetaTask) -> List[DerivativeRow]:
    """Derivative rows of one gauge: FD derivatives per stride, LHD/RHD at zero interval."""
    sel = SelectionPair(task.pre, task.post, task.em, task.gauge, task.scheme)
    left = lhd(task.op, 0.0, sel)
    right = rhd(task.op, 0.0, sel)
    rows = []
    for stride in task.strides:
        fl = fdlhd(task.op, stride, 0.0, sel)
        fr = fdrhd(task.op, 0.0, stride, sel)
        flagged = fl.flagged or fr.flagged or left.flagged or right.flagged
        rows.append(DerivativeRow(task.theta, stride, fl.value, fr.value, left.value, right.value, flagged))
    return rows


def _relative(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a)


class Laboratory:
    """Runs one configured scenario end to end."""

    def __init__(self, cfg: ScenarioConfig, store: Optional[ResultsStore] = None) -> None:
        self.logger = get_logger("core.laboratory.Laboratory")
        self.cfg = cfg
        self.store = store if store is not None else ResultsStore(cfg.run.out)
        self.scheme = GaugedScheme(cfg.gauge.scheme)

    def run(self) -> RunReport:
        kind = self.cfg.run.kind
        self.logger.info(f"Running {kind.value} scenario")
        with PerformanceTimer(f"scenario {kind.value}"):
            if kind is ScenarioKind.EFIELD:
                report = self.run_efield()
            elif kind is ScenarioKind.BFIELD:
                report = self.run_bfield()
            else:
                report = self.run_derivative_sweep()
        report.files = self.store.written
        self.store.write_manifest(
            self.cfg.as_dict(), report.lines, norm_drift=report.norm_drift, extra={"kind": kind.value}
        )
        for line in report.lines:
            self.logger.info(line)
        return report

    # derivative sweep

    def _preparation(self, grid: Grid1D) -> Tuple[Preparation, Optional[PacketParams]]:
        states = self.cfg.states
        if states.pre == "field":
            return FieldPreparation(load_field(states.pre_field, grid), self.scheme), None
        params = resolve_packet(states.pre, states.pre_packet, "states.pre")
        return PacketPreparation(params, grid), params

    def run_derivative_sweep(self) -> RunReport:
        cfg = self.cfg
        grid = build_grid(cfg)
        em = build_scenario(cfg)
        self.logger.info(f"Potentials: {em.describe()}")
        pre, pre_params = self._preparation(grid)
        post_params = resolve_packet(cfg.states.post, cfg.states.post_packet, "states.post")
        op = OperatorSpec.from_name(cfg.states.observable)
        strides = tuple(k * grid.dt for k in cfg.derivatives.stride_steps)
        tasks = [
            ThetaTask(theta, gauge, pre, PacketPost(post_params), em, self.scheme, op, strides)
            for theta, gauge in build_gauges(cfg)
        ]
        with PerformanceTimer(f"theta sweep ({len(tasks)} gauges, {len(strides)} strides)"):
            if cfg.run.workers > 1 and len(tasks) > 1:
                with ProcessPoolExecutor(max_workers=cfg.run.workers) as pool:
                    results = list(pool.map(sweep_theta, tasks))
            else:
                results = [sweep_theta(task) for task in tasks]
        rows = [row for chunk in results for row in chunk]
        self.store.write_derivatives(rows)

        log = StepLog()
        pair = pre.pair(em, None)
        Stepper(em, log=log).evolve(pair, max(strides))
        report = RunReport(cfg.run.kind, norm_drift=log.norm_drift)
        report.checks.append(self._norm_check(log.norm_drift))
        report.checks.extend(self._sweep_checks(rows, pre_params, post_params))
        sel = SelectionPair(pre, PacketPost(post_params), em, None, self.scheme)
        report.checks.extend(self._half_stride_lines(op, sel, max(strides), grid.dt))
        return report

    def _half_stride_lines(self, op: OperatorSpec, sel: SelectionPair, stride: float, dt: float) -> List[CheckLine]:
        """Coulomb-gauge FD derivatives at the largest stride and at half of it."""
        estimators = {
            "fdlhd": lambda s: fdlhd(op, s, 0.0, sel),
            "fdrhd": lambda s: fdrhd(op, 0.0, s, sel),
        }
        lines = []
        for name, estimator in estimators.items():
            rep = stride_convergence(estimator, stride, dt)
            lines.append(CheckLine(
                f"{name}_half_stride", CheckStatus.INFO,
                f"{rep.full.value:.4e} at {rep.full.stride:.3e} s, {rep.half.value:.4e} at {rep.half.stride:.3e} s "
                f"(relative change {rep.relative_change:.3e})",
            ))
        return lines

    def _norm_check(self, drift: float) -> CheckLine:
        return check("norm_drift", drift < NORM_DRIFT_LIMIT, f"{drift:.3e} (limit {NORM_DRIFT_LIMIT:.0e})")

    def _sweep_checks(
        self, rows: Sequence[DerivativeRow], pre: Optional[PacketParams], post: PacketParams
    ) -> List[CheckLine]:
        good = [r for r in rows if not r.flagged]
        if not good:
            return [CheckLine("derivatives", CheckStatus.FAIL, "every derivative sample is flagged")]
        cols = {name: np.array([getattr(r, name) for r in good]) for name in ("fdlhd", "fdrhd", "lhd", "rhd")}
        means = {name: float(np.mean(values)) for name, values in cols.items()}
        spreads = self._theta_spreads(good)
        kind = self.cfg.run.kind
        lines = []

        if kind in (ScenarioKind.POST_LOCALIZED, ScenarioKind.PRE_LOCALIZED):
            # The wide packet sets the reference velocity.
            wide = pre if kind is ScenarioKind.POST_LOCALIZED else post
            ref = wide.v_c
            moving, still = ("fdlhd", "fdrhd") if kind is ScenarioKind.POST_LOCALIZED else ("fdrhd", "fdlhd")
            theory = "lhd" if moving == "fdlhd" else "rhd"
            lines.append(check(f"{moving}_velocity", _relative(means[moving], ref) < 0.05,
                               f"mean {means[moving]:.4e} m/s vs {ref:.4e} m/s (tol 5%)"))
            lines.append(check(f"{still}_zero", abs(means[still]) < 0.05 * ref,
                               f"mean {means[still]:.4e} m/s (tol 5% of {ref:.4e})"))
            lines.append(check(f"{theory}_matches_{moving}", _relative(means[theory], means[moving]) < 0.02,
                               f"{means[theory]:.4e} vs {means[moving]:.4e} m/s (tol 2%)"))
            for name in ("fdlhd", "fdrhd", theory):
                lines.append(check(f"{name}_theta_spread", spreads[name] < 0.01 * ref,
                                   f"{spreads[name]:.3e} m/s (tol 1% of {ref:.4e})"))
        elif kind is ScenarioKind.DELOCALIZED:
            for name in ("lhd", "rhd"):
                scale = abs(means[name])
                lines.append(check(f"{name}_gauge_dependent", spreads[name] > 0.10 * scale,
                                   f"theta spread {spreads[name]:.3e} vs 10% of {scale:.3e} m/s"))
            scale = max(abs(means["fdlhd"] + means["fdrhd"]), abs(means["fdlhd"]), abs(means["fdrhd"]))
            for name in ("fdlhd", "fdrhd"):
                lines.append(check(f"{name}_theta_spread", spreads[name] < 0.01 * scale,
                                   f"{spreads[name]:.3e} m/s (tol 1% of {scale:.3e})"))
            theory_sum = means["lhd"] + means["rhd"]
            fd_sum = means["fdlhd"] + means["fdrhd"]
            lines.append(check("sum_identity", _relative(theory_sum, fd_sum) < 0.02,
                               f"LHD+RHD {theory_sum:.4e} vs FDLHD+FDRHD {fd_sum:.4e} m/s (tol 2%)"))
            for name, label in (("sum", "sum_theta_spread"), ("fd_sum", "fd_sum_theta_spread")):
                lines.append(check(label, spreads[name] < 0.01 * scale,
                                   f"{spreads[name]:.3e} m/s (tol 1% of {scale:.3e})"))
        else:
            for name, value in means.items():
                lines.append(CheckLine(f"{name}_mean", CheckStatus.INFO,
                                       f"{value:.4e} (theta spread {spreads[name]:.3e})"))
        return lines

    @staticmethod
    def _theta_spreads(rows: Sequence[DerivativeRow]) -> Dict[str, float]:
        """Largest spread over theta at any single stride."""
        spreads = {name: 0.0 for name in ("fdlhd", "fdrhd", "lhd", "rhd", "sum", "fd_sum")}
        for stride in sorted({r.stride for r in rows}):
            group = [r for r in rows if r.stride == stride]
            if len(group) < 2:
                continue
            for name in ("fdlhd", "fdrhd", "lhd", "rhd"):
                spreads[name] = max(spreads[name], theta_spread([getattr(r, name) for r in group]))
            spreads["sum"] = max(spreads["sum"], theta_spread([r.lhd + r.rhd for r in group]))
            spreads["fd_sum"] = max(spreads["fd_sum"], theta_spread([r.fdlhd + r.fdrhd for r in group]))
        return spreads

    # sensing runs

    def _reading_times(self, t0: float = 0.0) -> List[float]:
        run = self.cfg.run
        return [t0 + k * run.reading_interval for k in range(run.readings)]

    def _weak_value_rows(self, readings: Sequence[SensorReading]) -> List[WeakValueRow]:
        rows = []
        for r in readings:
            seen = set()
            for s in r.inputs:
                if s.t_l == 0.0 and s.t_r == 0.0 and s.observable not in seen:
                    seen.add(s.observable)
                    rows.append(WeakValueRow(r.traj_id, r.t, r.position, s.observable, s.value, s.flagged))
        return rows

    def _sensor_checks(self, readings: Sequence[SensorReading], target: float, unit: str) -> List[CheckLine]:
        summary = summarize_readings(readings)
        lines = [CheckLine("sensor_summary", CheckStatus.INFO,
                           f"mean {summary.mean:.4e} {unit}, spread {summary.spread:.3e} {unit}, "
                           f"{summary.count} used, {summary.excluded} excluded")]
        if summary.count == 0:
            lines.append(CheckLine("sensor_mean", CheckStatus.FAIL, "no usable readings"))
        elif target != 0.0:
            lines.append(check("sensor_mean", _relative(summary.mean, target) < 0.05,
                               f"{summary.mean:.4e} vs {target:.4e} {unit} (tol 5%)"))
        else:
            lines.append(check("sensor_mean", abs(summary.mean) < 5e4,
                               f"{summary.mean:.4e} {unit} (expected ~0)"))
        for t in sorted({r.t for r in readings}):
            group = summarize_readings([r for r in readings if r.t == t])
            lines.append(CheckLine(f"sensor_t={t:.3e}", CheckStatus.INFO,
                                   f"mean {group.mean:.4e} spread {group.spread:.3e} {unit} (n={group.count})"))
        return lines

    def _sensor_gauges(self) -> List[Tuple[float, GaugeFunction]]:
        """First and middle gauge of the configured sweep."""
        gauges = build_gauges(self.cfg)
        return gauges[:: max(1, len(gauges) // 2)][:2]

    @staticmethod
    def _spread_check(name: str, runs: Sequence[Sequence[SensorReading]], tol: float, across: str) -> CheckLine:
        spread = reading_spread(runs)
        if np.isnan(spread):
            return CheckLine(name, CheckStatus.FAIL, f"no point usable in every run ({across})")
        return check(name, spread < tol, f"largest relative change {spread:.3e} across {across} (tol {tol:.0%})")

    def run_efield(self) -> RunReport:
        cfg = self.cfg
        grid = build_grid(cfg)
        em = build_scenario(cfg)
        self.logger.info(f"Potentials: {em.describe()}")
        params = resolve_packet(cfg.states.pre, cfg.states.pre_packet, "states.pre")
        pair = seed_pair(params, grid, 0.0, em)
        starts = sample_initial_positions(pair.prev, cfg.run.trajectories, cfg.run.seed)
        log = StepLog()
        source = PropagatedVelocitySource(pair, em, log=log)
        with PerformanceTimer("efield trajectories"):
            trajectories = integrate_ensemble(
                starts, source, 0.0, cfg.run.duration, cfg.run.trajectory_dt, cfg.run.seed
            )
        self.store.write_trajectories(trajectories)

        # The stepper pair starts one step in, so readings are anchored from there.
        points = reading_points(trajectories, self._reading_times(pair.t))
        stride = cfg.derivatives.sensor_stride_steps * grid.dt
        route = KineticRoute(cfg.run.kinetic_route)
        with PerformanceTimer(f"efield readings ({len(points)})"):
            readings = estimate_E(points, pair, em, stride, scheme=self.scheme, route=route)
        self.store.write_sensor(readings)
        self.store.write_weak_values(self._weak_value_rows(readings))

        with PerformanceTimer("efield stride and gauge reruns"):
            doubled = estimate_E(points, pair, em, 2 * stride, scheme=self.scheme, route=route)
            gauged = [
                estimate_E(points, pair, em, stride, gauge=gauge, scheme=self.scheme, route=route)
                for _, gauge in self._sensor_gauges()
            ]

        report = RunReport(cfg.run.kind, norm_drift=log.norm_drift)
        report.checks.append(self._norm_check(log.norm_drift))
        report.checks.extend(self._sensor_checks(readings, cfg.states.electric_field, "V/m"))
        report.checks.append(self._spread_check(
            "sensor_stride_convergence", [readings, doubled], 0.02, f"strides {stride:.3e} and {2 * stride:.3e} s"
        ))
        report.checks.append(self._spread_check(
            "sensor_theta_spread", [readings] + gauged, 0.02, f"Coulomb and {len(gauged)} gauged runs"
        ))
        return report

    def run_bfield(self) -> RunReport:
        cfg = self.cfg
        grid = build_grid(cfg)
        em = build_scenario(cfg)
        self.logger.info(f"Potentials: {em.describe()}")
        lp = LandauParams(cfg.states.magnetic_field, cfg.states.k_y, cfg.states.landau_levels)
        psi, basis = landau_superposition(lp, grid)
        state = LandauState(basis)
        starts = sample_initial_positions(psi, cfg.run.trajectories, cfg.run.seed)
        with PerformanceTimer("bfield trajectories"):
            trajectories = integrate_ensemble(
                starts, LandauVelocitySource(state), 0.0, cfg.run.duration, cfg.run.trajectory_dt, cfg.run.seed
            )
        self.store.write_trajectories(trajectories)

        points = reading_points(trajectories, self._reading_times())
        stride = cfg.derivatives.landau_stride
        with PerformanceTimer(f"bfield readings ({len(points)})"):
            readings = estimate_B(points, state, em, stride)
            halved = estimate_B(points, state, em, stride / 2)
        self.store.write_sensor(readings)
        self.store.write_weak_values(self._weak_value_rows(readings))

        drift = abs(float(np.sum(np.abs(state.coeffs(cfg.run.duration)) ** 2)) - 1.0)
        report = RunReport(cfg.run.kind, norm_drift=drift)
        report.checks.append(self._norm_check(drift))
        report.checks.extend(self._sensor_checks(readings, cfg.states.magnetic_field, "T"))
        report.checks.append(self._spread_check(
            "sensor_stride_convergence", [readings, halved], 0.01, f"strides {stride:.3e} and {stride / 2:.3e} s"
        ))
        report.checks.append(self._period_check(trajectories, lp))
        return report

    def _period_check(self, trajectories: Sequence[Trajectory], lp: LandauParams) -> CheckLine:
        periods = []
        for traj in trajectories:
            try:
                periods.append(oscillation_period(traj.times, traj.velocities(0)))
            except NumericalError as e:
                self.logger.warning(f"No period for trajectory {traj.traj_id}: {e}")
        if not periods:
            return CheckLine("oscillation_period", CheckStatus.FAIL, "no trajectory completed an oscillation")
        period = float(np.mean(periods))
        return check("oscillation_period", _relative(period, lp.period) < 0.05,
                     f"{period:.4e} s vs 2*pi/omega_B = {lp.period:.4e} s (tol 5%)")


def run_scenario(cfg: ScenarioConfig, store: Optional[ResultsStore] = None) -> RunReport:
    """
    Run a scenario and write its tables and manifest.

    Returns:
        The report with acceptance lines; ``passed`` is False if any check failed
    """
    return Laboratory(cfg, store).run()
