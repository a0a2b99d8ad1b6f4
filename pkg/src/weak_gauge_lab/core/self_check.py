"""
Reduced-scale invariant suites.

Each suite returns CheckLines; a suite that raises a lab error reports FAIL
with the exception type instead of aborting the remaining suites.
"""

from typing import Callable, List

import numpy as np

from ..constants import HBAR
from ..utils.config import GridSettings, ScenarioConfig
from ..utils.exceptions import WeakGaugeLabError
from ..utils.logger import PerformanceTimer, get_logger
from .fields import Grid1D, l2_distance
from .gauge import EmScenario, apply_gauge
from .laboratory import CheckLine, CheckStatus, build_gauges, check
from .operators import (
    IDENTITY,
    KINETIC_ENERGY,
    HAMILTONIAN,
    MOMENTUM,
    POSITION,
    VELOCITY,
    OperatorKind,
    OperatorSpec,
    classify_numerically,
    commutes,
    gauge_class,
)
from .propagator import PacketPreparation, StepLog, Stepper, seed_pair
from .states import gaussian_field, reference_packet
from .weakeval import PacketPost, SelectionPair, fdlhd, hermiticity_gap, lhd, continuity_residual, sum_identity

logger = get_logger("core.self_check")

PROPAGATION_STEPS = 1000
CLOSED_FORM_TOLERANCE = 1e-3
ROUND_TRIP_TOLERANCE = 1e-12
CONTINUITY_TOLERANCE = 1e-3
SUM_TOLERANCE = 0.02
HERMITICITY_TOLERANCE = 1e-6


def _grid(cfg: ScenarioConfig) -> Grid1D:
    g = cfg.grid if not cfg.grid.is_2d else GridSettings(dt=cfg.grid.dt)
    return Grid1D.spanning(g.x_min, g.x_max, g.dx, g.dt)


def propagator_suite(cfg: ScenarioConfig) -> List[CheckLine]:
    grid = _grid(cfg)
    params = reference_packet("packet1")
    em = EmScenario.free()
    log = StepLog()
    pair = Stepper(em, log=log).evolve(seed_pair(params, grid, 0.0, em), PROPAGATION_STEPS * grid.dt)
    exact = gaussian_field(params, grid, pair.t, elapsed=pair.t, check_box=False)
    error = l2_distance(pair.cur, exact, align_phase=True)
    return [
        check("norm_conservation", log.norm_drift < 1e-4, f"drift {log.norm_drift:.3e} over {PROPAGATION_STEPS} steps"),
        check("closed_form", error < CLOSED_FORM_TOLERANCE, f"L2 error {error:.3e} at t={pair.t:.3e} s"),
    ]


def gauge_suite(cfg: ScenarioConfig) -> List[CheckLine]:
    psi = gaussian_field(reference_packet("packet1"), _grid(cfg), 0.0)
    worst = max(
        l2_distance(apply_gauge(apply_gauge(psi, gauge), gauge, inverse=True), psi) for _, gauge in build_gauges(cfg)
    )
    return [check("gauge_round_trip", worst < ROUND_TRIP_TOLERANCE, f"max L2 {worst:.3e}")]


def continuity_suite(cfg: ScenarioConfig) -> List[CheckLine]:
    grid = _grid(cfg)
    em = EmScenario.free()
    residual = continuity_residual(seed_pair(reference_packet("packet1"), grid, 0.0, em), em)
    return [check("continuity", residual < CONTINUITY_TOLERANCE, f"relative residual {residual:.3e}")]


ORACLE_OPERATORS = [
    IDENTITY,
    POSITION,
    MOMENTUM,
    VELOCITY,
    KINETIC_ENERGY,
    HAMILTONIAN,
    OperatorSpec(OperatorKind.SCALAR_POTENTIAL),
    OperatorSpec(OperatorKind.VECTOR_POTENTIAL),
    OperatorSpec(OperatorKind.ELECTRIC_FIELD),
]


def operator_suite(cfg: ScenarioConfig) -> List[CheckLine]:
    grid = _grid(cfg)
    params = reference_packet("packet1")
    psi = gaussian_field(params, grid, 0.0)
    em = EmScenario.uniform_electric(-1e6)
    _, gauge = build_gauges(cfg)[0]
    ops = ORACLE_OPERATORS + [
        OperatorSpec.position_projector(params.x_c),
        OperatorSpec.momentum_projector(HBAR * params.k_c),
        OperatorSpec.velocity_projector(params.v_c),
    ]
    mismatches = []
    for op in ops:
        verdict, residual = classify_numerically(op, psi, em, gauge)
        if verdict is not gauge_class(op):
            mismatches.append(f"{op.name} ({residual:.2e})")
    summary = f"{len(ops) - len(mismatches)}/{len(ops)} match"
    if mismatches:
        summary += f"; mismatched: {', '.join(mismatches)}"
    lines = [check("operator_classes", not mismatches, summary)]
    same, _ = commutes(POSITION, OperatorSpec.position_projector(params.x_c), psi)
    different, residual = commutes(POSITION, MOMENTUM, psi)
    lines.append(check("commutator_oracle", same and not different,
                       f"[X, P_x0] = 0: {same}; [X, P] != 0: {not different} ({residual:.3e})"))
    return lines


def sum_identity_suite(cfg: ScenarioConfig) -> List[CheckLine]:
    grid = _grid(cfg)
    em = EmScenario.free()
    pre, post = reference_packet("packet1"), reference_packet("packet2")
    sel = SelectionPair(PacketPreparation(pre, grid), PacketPost(post), em)
    lhs, rhs = sum_identity(POSITION, sel)
    gap = abs(lhs - rhs) / abs(rhs) if rhs else abs(lhs)
    phi = gaussian_field(post, grid, 0.0)
    psi = gaussian_field(pre, grid, 0.0)
    herm = hermiticity_gap(psi, phi, em)
    return [
        check("sum_identity", gap < SUM_TOLERANCE, f"lhs {lhs:.4e} vs rhs {rhs:.4e} m/s"),
        check("hermiticity", herm < HERMITICITY_TOLERANCE, f"relative gap {herm:.3e}"),
    ]


def theta_suite(cfg: ScenarioConfig) -> List[CheckLine]:
    """Delocalized pair: LHD depends on the gauge, FDLHD does not."""
    grid = _grid(cfg)
    em = EmScenario.free()
    pre = PacketPreparation(reference_packet("packet3"), grid)
    post = PacketPost(reference_packet("packet4"))
    stride = cfg.derivatives.stride_steps[0] * grid.dt
    theory, empirical = [], []
    for _, gauge in build_gauges(cfg):
        sel = SelectionPair(pre, post, em, gauge)
        theory.append(lhd(POSITION, 0.0, sel).value)
        empirical.append(fdlhd(POSITION, stride, 0.0, sel).value)
    if len(theory) < 2:
        return [CheckLine("theta_sweep", CheckStatus.INFO, "needs at least two gauges")]
    lhd_spread = float(np.ptp(theory))
    fd_spread = float(np.ptp(empirical))
    lhd_scale = abs(float(np.mean(theory)))
    fd_scale = abs(float(np.mean(empirical)))
    return [
        check("lhd_theta_spread", lhd_spread > 0.10 * lhd_scale,
              f"LHD theta-spread {lhd_spread:.3e} > tol {0.10 * lhd_scale:.3e}", expected=True),
        check("fdlhd_theta_spread", fd_spread < 0.01 * fd_scale,
              f"FDLHD theta-spread {fd_spread:.3e} < tol {0.01 * fd_scale:.3e}", expected=True),
    ]


SUITES: List[Callable[[ScenarioConfig], List[CheckLine]]] = [
    propagator_suite,
    gauge_suite,
    continuity_suite,
    operator_suite,
    sum_identity_suite,
    theta_suite,
]


def self_check(cfg: ScenarioConfig) -> List[CheckLine]:
    """
    Run every suite at reduced scale.

    Returns:
        One or more lines per suite; failures are report content
    """
    lines: List[CheckLine] = []
    for suite in SUITES:
        name = suite.__name__.replace("_suite", "")
        try:
            with PerformanceTimer(f"self-check {name}"):
                lines.extend(suite(cfg))
        except WeakGaugeLabError as e:
            logger.error(f"Suite {name} failed: {e.message}")
            lines.append(CheckLine(name, CheckStatus.FAIL, f"{type(e).__name__}: {e.message}"))
    return lines
