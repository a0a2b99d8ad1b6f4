"""
Spatial grids and complex wave fields.

Every other module computes on these types: uniform 1D/2D meshes, immutable
complex fields tagged with the gauge they are expressed in, Riemann-sum inner
products and second-order finite-difference stencils.
"""

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Tuple, Union

import numpy as np

from ..utils.exceptions import GaugeMixing, GridError, GridMismatch, ZeroState

if TYPE_CHECKING:
    from .gauge import GaugeFunction

logger = logging.getLogger("weak_gauge_lab.core.fields")

# Two fields are simultaneous when their times agree to this fraction of dt.
TIME_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Grid1D:
    """Uniform mesh x_k = x0 + k*dx with its time step."""
    x0: float
    dx: float
    nx: int
    dt: float

    def __post_init__(self) -> None:
        if not self.dx > 0:
            raise GridError(f"Grid spacing must be positive, got dx={self.dx}")
        if not self.dt > 0:
            raise GridError(f"Time step must be positive, got dt={self.dt}")
        if self.nx < 3:
            raise GridError(f"Grid needs at least 3 points, got nx={self.nx}")

    @classmethod
    def spanning(cls, x_min: float, x_max: float, dx: float, dt: float) -> "Grid1D":
        """Build the grid covering [x_min, x_max] with the given spacing."""
        nx = int(round((x_max - x_min) / dx)) + 1
        return cls(x0=x_min, dx=dx, nx=nx, dt=dt)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def x_max(self) -> float:
        return self.x0 + self.dx * (self.nx - 1)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.nx,)

    @property
    def cell(self) -> float:
        return self.dx

    @property
    def ndim(self) -> int:
        return 1

    @property
    def spacings(self) -> Tuple[float, ...]:
        return (self.dx,)

    def axes(self) -> Tuple[np.ndarray, ...]:
        return (self.x,)

    def coords(self) -> Tuple[np.ndarray, ...]:
        """Coordinate arrays broadcastable against a field's amplitudes."""
        return (self.x,)

    def nearest_index(self, position: float) -> int:
        k = int(round((position - self.x0) / self.dx))
        return min(max(k, 0), self.nx - 1)

    def contains(self, position: float) -> bool:
        return self.x0 <= position <= self.x_max


@dataclass(frozen=True)
class Grid2D:
    """Tensor-product mesh; point (x_k, y_l) is addressed row-major as [k, l]."""
    x_axis: Grid1D
    y_axis: Grid1D

    def __post_init__(self) -> None:
        if self.x_axis.dt != self.y_axis.dt:
            raise GridError("Both axes of a 2D grid must share dt")

    @classmethod
    def spanning(
        cls, x_range: Tuple[float, float], y_range: Tuple[float, float], dx: float, dy: float, dt: float
    ) -> "Grid2D":
        return cls(Grid1D.spanning(*x_range, dx, dt), Grid1D.spanning(*y_range, dy, dt))

    @property
    def dt(self) -> float:
        return self.x_axis.dt

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.x_axis.nx, self.y_axis.nx)

    @property
    def cell(self) -> float:
        return self.x_axis.dx * self.y_axis.dx

    @property
    def ndim(self) -> int:
        return 2

    @property
    def spacings(self) -> Tuple[float, ...]:
        return (self.x_axis.dx, self.y_axis.dx)

    def axes(self) -> Tuple[np.ndarray, ...]:
        return (self.x_axis.x, self.y_axis.x)

    def coords(self) -> Tuple[np.ndarray, ...]:
        return (self.x_axis.x[:, None], self.y_axis.x[None, :])


Grid = Union[Grid1D, Grid2D]


@dataclass(frozen=True, eq=False)
class WaveField:
    """
    Complex amplitudes over a grid at one instant.

    ``gauge`` is None for the Coulomb expression of the state; otherwise it is
    the gauge function the amplitudes were transformed with.
    """
    grid: Grid
    amplitudes: np.ndarray
    t: float
    gauge: Optional["GaugeFunction"] = field(default=None)

    def __post_init__(self) -> None:
        data = np.array(self.amplitudes, dtype=complex)
        if data.shape != self.grid.shape:
            raise GridMismatch(
                f"Amplitude shape {data.shape} does not match grid shape {self.grid.shape}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "amplitudes", data)

    @property
    def gauge_tag(self) -> Optional[str]:
        return None if self.gauge is None else self.gauge.tag

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def with_amplitudes(self, amplitudes: np.ndarray, t: Optional[float] = None) -> "WaveField":
        """Same grid and gauge, new data (and optionally a new time)."""
        return WaveField(self.grid, amplitudes, self.t if t is None else t, self.gauge)

    def scaled(self, factor: complex) -> "WaveField":
        return self.with_amplitudes(self.amplitudes * factor)


def check_compatible(a: WaveField, b: WaveField, same_time: bool = True) -> None:
    """
    Refuse to combine fields from different grids, gauges or instants.

    Raises:
        GridMismatch: If grids or times differ
        GaugeMixing: If gauge tags differ
    """
    if a.grid != b.grid:
        raise GridMismatch("Fields live on different grids")
    if a.gauge_tag != b.gauge_tag:
        raise GaugeMixing(
            "Fields are expressed in different gauges",
            details=f"{a.gauge_tag!r} vs {b.gauge_tag!r}",
        )
    if same_time and abs(a.t - b.t) > TIME_TOLERANCE * a.grid.dt:
        raise GridMismatch(f"Fields are not simultaneous: t={a.t:.6e} vs t={b.t:.6e}")


def inner(bra: WaveField, ket: WaveField) -> complex:
    """
    Riemann-sum inner product <bra|ket>.

    Args:
        bra: Field to conjugate
        ket: Field acted on

    Returns:
        sum(conj(bra) * ket) * cell
    """
    check_compatible(bra, ket)
    return complex(np.vdot(bra.amplitudes, ket.amplitudes) * bra.grid.cell)


def norm(psi: WaveField) -> float:
    return float(np.sqrt(np.sum(psi.density) * psi.grid.cell))


def normalize(psi: WaveField) -> WaveField:
    """
    Return a unit-norm copy of the field.

    Raises:
        ZeroState: If the field has zero norm
    """
    size = norm(psi)
    if size == 0.0 or not np.isfinite(size):
        raise ZeroState("Cannot normalize a field with zero norm")
    if size == 1.0:
        return psi
    return psi.scaled(1.0 / size)


def gradient(data: np.ndarray, spacing: float, axis: int = 0) -> np.ndarray:
    """Central differences inside, one-sided second order at the edges."""
    return np.gradient(data, spacing, axis=axis, edge_order=2)


def central_diff(psi: WaveField, axis: int = 0) -> np.ndarray:
    """
    First derivative of a field along one axis.

    Args:
        psi: Field to differentiate
        axis: 0 for x, 1 for y (2D only)

    Returns:
        Complex array with the derivative at every grid point
    """
    if axis >= psi.grid.ndim:
        raise GridError(f"Axis {axis} does not exist on a {psi.grid.ndim}D grid")
    if psi.grid.shape[axis] < 3:
        raise GridError("central_diff needs at least 3 points along the axis")
    return gradient(psi.amplitudes, psi.grid.spacings[axis], axis)


def second_diff(data: np.ndarray, spacing: float, axis: int = 0) -> np.ndarray:
    """
    Compact 3-point second derivative.

    Edge rows use the one-sided second-order stencil (2, -5, 4, -1)/h^2 so the
    result keeps the interior accuracy order.
    """
    moved = np.moveaxis(np.asarray(data), axis, 0)
    out = np.empty_like(moved, dtype=np.result_type(moved, float))
    out[1:-1] = moved[2:] - 2.0 * moved[1:-1] + moved[:-2]
    if moved.shape[0] >= 4:
        out[0] = 2.0 * moved[0] - 5.0 * moved[1] + 4.0 * moved[2] - moved[3]
        out[-1] = 2.0 * moved[-1] - 5.0 * moved[-2] + 4.0 * moved[-3] - moved[-4]
    else:
        out[0] = out[1]
        out[-1] = out[-2]
    return np.moveaxis(out / spacing**2, 0, axis)


def dirichlet_laplacian(data: np.ndarray) -> np.ndarray:
    """Undivided 1D Laplacian with zeros assumed outside the box."""
    out = -2.0 * data
    out[1:] += data[:-1]
    out[:-1] += data[1:]
    return out


def dirichlet_diff(data: np.ndarray) -> np.ndarray:
    """Undivided 1D central difference (psi_{k+1} - psi_{k-1}) with zero padding."""
    out = np.zeros_like(data)
    out[1:-1] = data[2:] - data[:-2]
    out[0] = data[1]
    out[-1] = -data[-2]
    return out


def boundary_amplitude(psi: WaveField) -> float:
    """Largest edge amplitude relative to the peak amplitude."""
    magnitude = np.abs(psi.amplitudes)
    peak = magnitude.max()
    if peak == 0.0:
        return 0.0
    edges = [magnitude[0], magnitude[-1]]
    if psi.grid.ndim == 2:
        edges = [magnitude[0, :], magnitude[-1, :], magnitude[:, 0], magnitude[:, -1]]
    return float(max(np.max(edge) for edge in edges) / peak)


def l2_distance(a: WaveField, b: WaveField, align_phase: bool = False) -> float:
    """
    L2 norm of a - b, optionally after removing the best global phase.

    Args:
        a: First field
        b: Reference field
        align_phase: Rotate ``a`` by the phase of <a|b> first

    Returns:
        ||a - b|| on the common grid
    """
    check_compatible(a, b, same_time=False)
    data = a.amplitudes
    if align_phase:
        overlap = np.vdot(data, b.amplitudes)
        if overlap != 0:
            data = data * (overlap / abs(overlap))
    return float(np.sqrt(np.sum(np.abs(data - b.amplitudes) ** 2) * a.grid.cell))


def interpolation_weights(grid: Grid1D, position: float) -> Tuple[int, float]:
    """Left cell index and fractional offset for linear interpolation."""
    s = (position - grid.x0) / grid.dx
    k = int(np.floor(s))
    k = min(max(k, 0), grid.nx - 2)
    return k, float(s - k)
