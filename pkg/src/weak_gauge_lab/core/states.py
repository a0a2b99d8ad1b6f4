"""
Pre- and post-selected states.

Analytic Gaussian packets (two consecutive snapshots for the three-level
stepper), the registry of reference packets, and Landau-level eigenstates of
a uniform magnetic field in the Landau gauge.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..constants import BOUNDARY_CLIP, CHARGE, EFFECTIVE_MASS, HBAR, MEV, NM, PER_NM
from ..utils.exceptions import BoxTooSmall, StateError, UnknownState
from .fields import Grid1D, Grid2D, WaveField, boundary_amplitude, normalize

logger = logging.getLogger("weak_gauge_lab.core.states")


@dataclass(frozen=True)
class PacketParams:
    """Gaussian packet: central kinetic energy (J), centre (m) and width (m)."""
    energy: float
    x_c: float
    sigma_x: float

    def __post_init__(self) -> None:
        if not self.energy > 0:
            raise StateError(f"Packet energy must be positive, got {self.energy}")
        if not self.sigma_x > 0:
            raise StateError(f"Packet width must be positive, got {self.sigma_x}")

    @classmethod
    def from_lab_units(cls, energy_mev: float, x_c_nm: float, sigma_nm: float) -> "PacketParams":
        return cls(energy_mev * MEV, x_c_nm * NM, sigma_nm * NM)

    @property
    def k_c(self) -> float:
        return math.sqrt(2.0 * EFFECTIVE_MASS * self.energy / HBAR**2)

    @property
    def v_c(self) -> float:
        return HBAR * self.k_c / EFFECTIVE_MASS


# name -> (energy meV, centre nm, width nm)
REFERENCE_PACKETS: Dict[str, Tuple[float, float, float]] = {
    "packet1": (10.0, 400.0, 84.0),
    "packet2": (5.0, 400.0, 5.0),  # narrow enough to stand in for a position eigenstate
    "packet3": (10.0, 400.0, 60.0),
    "packet4": (5.0, 400.0, 40.0),
    "packet5": (50.0, 200.0, 127.0),
}


def reference_packet(name: str) -> PacketParams:
    """
    Look up a registered packet.

    Args:
        name: Registry key, ``packet1`` .. ``packet5``

    Returns:
        The registered parameters

    Raises:
        UnknownState: If the name is not registered
    """
    try:
        energy_mev, x_c_nm, sigma_nm = REFERENCE_PACKETS[name.strip().lower()]
    except KeyError:
        raise UnknownState(f"Unknown reference packet '{name}'", details=f"known: {sorted(REFERENCE_PACKETS)}")
    return PacketParams.from_lab_units(energy_mev, x_c_nm, sigma_nm)


def gaussian_amplitudes(p: PacketParams, x: np.ndarray, elapsed: float) -> np.ndarray:
    """
    Closed-form freely spreading Gaussian ``elapsed`` seconds after preparation.

    tan(2*kappa) = hbar*t/(m*sigma^2) and zeta = -kappa - hbar*k_c^2*t/(2m).
    """
    m = EFFECTIVE_MASS
    sigma2 = p.sigma_x**2
    kappa = 0.5 * math.atan(HBAR * elapsed / (m * sigma2))
    zeta = -kappa - HBAR * p.k_c**2 * elapsed / (2.0 * m)
    prefactor = (4.0 * sigma2 / math.pi) ** 0.25 / (4.0 * sigma2**2 + 4.0 * (HBAR * elapsed / m) ** 2) ** 0.25
    shifted = x - p.x_c - p.v_c * elapsed
    width = 2.0 * sigma2 + 2j * HBAR * elapsed / m
    return prefactor * np.exp(1j * zeta + 1j * p.k_c * (x - p.x_c) - shifted**2 / width)


def gaussian_field(p: PacketParams, grid: Grid1D, t: float, elapsed: float = 0.0, check_box: bool = True) -> WaveField:
    """Normalized packet field stamped with time ``t``."""
    psi = WaveField(grid, gaussian_amplitudes(p, grid.x, elapsed), t)
    if check_box:
        edge = boundary_amplitude(psi)
        if edge > BOUNDARY_CLIP:
            raise BoxTooSmall(
                f"Packet clipped by the box (boundary amplitude {edge:.3e})",
                boundary_amplitude=edge,
                details=f"x_c={p.x_c:.4e} m, sigma={p.sigma_x:.4e} m, box=[{grid.x0:.4e}, {grid.x_max:.4e}] m",
            )
    return normalize(psi)


def gaussian_pair(p: PacketParams, grid: Grid1D, t_p: float = 0.0) -> Tuple[WaveField, WaveField]:
    """
    Two analytic snapshots, at t_p and t_p + dt, to bootstrap the stepper.

    Args:
        p: Packet parameters
        grid: 1D grid (its dt sets the snapshot spacing)
        t_p: Preparation time

    Returns:
        (psi(t_p), psi(t_p + dt)), both normalized and in the Coulomb gauge

    Raises:
        BoxTooSmall: If the packet reaches the box edges
    """
    first = gaussian_field(p, grid, t_p, 0.0)
    second = gaussian_field(p, grid, t_p + grid.dt, grid.dt)
    return first, second


@dataclass(frozen=True)
class LandauParams:
    """Uniform field B along z, y wave number and the initial level weights."""
    magnetic_field: float
    k_y: float
    n_max: int = 10
    coeffs: Optional[Tuple[complex, ...]] = None

    def __post_init__(self) -> None:
        if not self.magnetic_field > 0:
            raise StateError(f"Magnetic field must be positive, got {self.magnetic_field}")
        if self.n_max < 1:
            raise StateError("n_max must be at least 1")
        weights = np.ones(self.n_max, dtype=complex) if self.coeffs is None else np.asarray(self.coeffs, dtype=complex)
        if weights.shape != (self.n_max,):
            raise StateError(f"Expected {self.n_max} level weights, got {weights.shape}")
        total = np.sqrt(np.sum(np.abs(weights) ** 2))
        if total == 0:
            raise StateError("Level weights are all zero")
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in weights / total))

    @classmethod
    def from_lab_units(cls, b_tesla: float, k_y_per_nm: float, n_max: int = 10) -> "LandauParams":
        return cls(b_tesla, k_y_per_nm * PER_NM, n_max)

    @property
    def omega_b(self) -> float:
        return abs(CHARGE) * self.magnetic_field / EFFECTIVE_MASS

    @property
    def cyclotron(self) -> float:
        """Signed rotation rate qB/m of the velocity vector."""
        return CHARGE * self.magnetic_field / EFFECTIVE_MASS

    @property
    def l_b(self) -> float:
        return math.sqrt(HBAR / (abs(CHARGE) * self.magnetic_field))

    @property
    def x_y(self) -> float:
        return self.k_y * self.l_b**2

    @property
    def center(self) -> float:
        """Orbit centre hbar*k_y/(q*B); equals -x_y for a negative carrier."""
        return HBAR * self.k_y / (CHARGE * self.magnetic_field)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega_b

    def energy(self, n: int) -> float:
        return HBAR * self.omega_b * (n + 0.5)

    @property
    def energies(self) -> np.ndarray:
        return HBAR * self.omega_b * (np.arange(self.n_max) + 0.5)


def hermite_functions(count: int, xi: np.ndarray) -> np.ndarray:
    """
    Normalized Hermite functions psi_0 .. psi_{count-1} at ``xi``.

    Three-term recurrence on the normalized functions, so nothing overflows
    for large arguments.
    """
    xi = np.asarray(xi, dtype=float)
    out = np.empty((count,) + xi.shape)
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * xi**2)
    if count > 1:
        out[1] = math.sqrt(2.0) * xi * out[0]
    for n in range(1, count - 1):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * xi * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def _check_landau_box(n: int, lp: LandauParams, grid: Grid2D) -> None:
    reach = (math.sqrt(2 * n + 1) + 6.0) * lp.l_b
    lo, hi = lp.center - reach, lp.center + reach
    axis = grid.x_axis
    if axis.x0 > lo or axis.x_max < hi:
        xi = (np.array([axis.x0, axis.x_max]) - lp.center) / lp.l_b
        edge = float(np.max(np.abs(hermite_functions(n + 1, xi)[n])))
        raise BoxTooSmall(
            f"Landau level {n} needs x in [{lo:.4e}, {hi:.4e}] m",
            boundary_amplitude=edge,
            details=f"box=[{axis.x0:.4e}, {axis.x_max:.4e}] m",
        )


@dataclass(frozen=True, eq=False)
class LandauBasis:
    """
    x-profiles of the Landau levels kept next to a superposition field.

    A level is phi_n(x) * exp(i k_y y)/sqrt(L_y); profiles are stored on the x
    axis of ``grid`` with unit 1D norm.
    """
    params: LandauParams
    grid: Grid2D
    profiles: np.ndarray

    @classmethod
    def build(cls, lp: LandauParams, grid: Grid2D) -> "LandauBasis":
        for n in range(lp.n_max):
            _check_landau_box(n, lp, grid)
        return cls(lp, grid, landau_profiles(lp, grid.x_axis.x))

    @property
    def y_length(self) -> float:
        return self.grid.y_axis.nx * self.grid.y_axis.dx

    def y_phase(self, y: np.ndarray) -> np.ndarray:
        return np.exp(1j * self.params.k_y * np.asarray(y)) / math.sqrt(self.y_length)

    def profile(self, coeffs: Sequence[complex]) -> np.ndarray:
        return np.asarray(coeffs, dtype=complex) @ self.profiles

    def field(self, coeffs: Sequence[complex], t: float) -> WaveField:
        data = self.profile(coeffs)[:, None] * self.y_phase(self.grid.y_axis.x)[None, :]
        return WaveField(self.grid, data, t)


def landau_profiles(lp: LandauParams, x: np.ndarray) -> np.ndarray:
    """phi_n(x) = l_B^(-1/2) * psi_n((x - center)/l_B) for all n < n_max."""
    xi = (np.asarray(x) - lp.center) / lp.l_b
    return hermite_functions(lp.n_max, xi) / math.sqrt(lp.l_b)


def landau_eigenstate(n: int, lp: LandauParams, grid: Grid2D) -> WaveField:
    """
    Single Landau level on the 2D grid.

    Raises:
        StateError: If n is outside [0, n_max)
        BoxTooSmall: If the grid does not span the level
    """
    if not 0 <= n < lp.n_max:
        raise StateError(f"Level {n} outside [0, {lp.n_max})")
    _check_landau_box(n, lp, grid)
    coeffs = np.zeros(lp.n_max, dtype=complex)
    coeffs[n] = 1.0
    basis = LandauBasis(lp, grid, landau_profiles(lp, grid.x_axis.x))
    return normalize(basis.field(coeffs, 0.0))


def landau_superposition(lp: LandauParams, grid: Grid2D) -> Tuple[WaveField, LandauBasis]:
    """
    Weighted sum of the first n_max levels at t = 0.

    Returns:
        The normalized field and the basis it was built from
    """
    basis = LandauBasis.build(lp, grid)
    psi = normalize(basis.field(lp.coeffs, 0.0))
    logger.debug(
        f"Landau superposition: n_max={lp.n_max}, omega_B={lp.omega_b:.4e} rad/s, "
        f"l_B={lp.l_b:.4e} m, centre={lp.center:.4e} m"
    )
    return psi, basis
