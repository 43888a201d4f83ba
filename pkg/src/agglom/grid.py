"""Periodic 2-D geometry and discrete vector calculus.

Everything lives on a torus: a rectangle [0, Lx) x [0, Ly) with both axes
wrapping. Fields are cell-centered, stored as (nx, ny) arrays with axis 0
along x; cell (i, j) is centered at ((i + 1/2) dx, (j + 1/2) dy).

The analysis operators here are centered second-order stencils. The PDE
solver uses its own upwind face fluxes, so monotonicity concerns do not
enter this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError

MIN_CELLS = 8


@dataclass(frozen=True)
class Grid2D:
    """Uniform cell-centered discretization of a periodic rectangle."""

    Lx: float
    Ly: float
    nx: int
    ny: int
    dx: float
    dy: float

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    def y_centers(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """(nx, ny) coordinate arrays of the cell centers."""
        return np.meshgrid(self.x_centers(), self.y_centers(), indexing="ij")

    def wrap(self, xy: np.ndarray) -> np.ndarray:
        """Map points (..., 2) into [0, Lx) x [0, Ly)."""
        out = np.array(xy, dtype=float, copy=True)
        out[..., 0] %= self.Lx
        out[..., 1] %= self.Ly
        return out


def make_grid(Lx: float, Ly: float, nx: int, ny: int) -> Grid2D:
    """Build a torus grid with dx = Lx/nx, dy = Ly/ny.

    Raises ConfigurationError for non-positive lengths or fewer than
    MIN_CELLS cells per axis.
    """
    if not (Lx > 0 and Ly > 0):
        raise ConfigurationError(f"domain lengths must be positive, got Lx={Lx}, Ly={Ly}")
    nx, ny = int(nx), int(ny)
    if nx < MIN_CELLS or ny < MIN_CELLS:
        raise ConfigurationError(
            f"need at least {MIN_CELLS} cells per axis, got nx={nx}, ny={ny}"
        )
    return Grid2D(Lx=float(Lx), Ly=float(Ly), nx=nx, ny=ny, dx=Lx / nx, dy=Ly / ny)


@dataclass(eq=False)
class ScalarField:
    """Cell-centered scalar values on a Grid2D."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ConfigurationError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def cell_sum(self) -> float:
        return float(self.values.sum())

    def integral(self) -> float:
        """Mass: cell sum times cell area."""
        return float(self.values.sum()) * self.grid.cell_area


@dataclass(eq=False)
class VectorField:
    """Cell-centered vector values (vx, vy) on a Grid2D."""

    grid: Grid2D
    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        self.vx = np.asarray(self.vx, dtype=float)
        self.vy = np.asarray(self.vy, dtype=float)
        if self.vx.shape != self.grid.shape or self.vy.shape != self.grid.shape:
            raise ConfigurationError("vector component shape does not match grid")


def constant_field(grid: Grid2D, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, float(value)))


def _require_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        bad = np.argwhere(~np.isfinite(arr))
        raise NumericError(f"{what} contains non-finite values, first at cell {tuple(bad[0])}")


def require_same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise ConfigurationError("fields live on different grids")


def gradient(f: ScalarField) -> VectorField:
    """Centered second-order periodic gradient."""
    _require_finite(f.values, "gradient input")
    v = f.values
    vx = (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) / (2.0 * f.grid.dx)
    vy = (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2.0 * f.grid.dy)
    return VectorField(f.grid, vx, vy)


def divergence(F: VectorField) -> ScalarField:
    """Centered periodic divergence, discretely adjoint to `gradient`.

    For any scalar g and vector F on the torus
        sum g * div(F) * dA == -sum grad(g) . F * dA
    up to rounding, which is what makes flux bookkeeping exact.
    """
    _require_finite(F.vx, "divergence input vx")
    _require_finite(F.vy, "divergence input vy")
    dvx = (np.roll(F.vx, -1, axis=0) - np.roll(F.vx, 1, axis=0)) / (2.0 * F.grid.dx)
    dvy = (np.roll(F.vy, -1, axis=1) - np.roll(F.vy, 1, axis=1)) / (2.0 * F.grid.dy)
    return ScalarField(F.grid, dvx + dvy)


def laplacian(f: ScalarField) -> ScalarField:
    """Standard compact 5-point periodic Laplacian.

    Note this is not the composition divergence(gradient(f)): the centered
    first-order stencils compose to the wide (i +/- 2) Laplacian, which
    agrees with the 5-point one only to O(dx^2).
    """
    _require_finite(f.values, "laplacian input")
    v = f.values
    lx = (np.roll(v, -1, axis=0) - 2.0 * v + np.roll(v, 1, axis=0)) / f.grid.dx**2
    ly = (np.roll(v, -1, axis=1) - 2.0 * v + np.roll(v, 1, axis=1)) / f.grid.dy**2
    return ScalarField(f.grid, lx + ly)


def laplacian_eigenvalue(grid: Grid2D, mx: int, my: int) -> float:
    """Eigenvalue of the 5-point Laplacian for the Fourier mode
    exp(2i pi (mx x / Lx + my y / Ly))."""
    ex = -(2.0 / grid.dx**2) * (1.0 - np.cos(2.0 * np.pi * mx * grid.dx / grid.Lx))
    ey = -(2.0 / grid.dy**2) * (1.0 - np.cos(2.0 * np.pi * my * grid.dy / grid.Ly))
    return float(ex + ey)


def bilinear_sample(f: ScalarField, xy: np.ndarray) -> np.ndarray:
    """Sample a cell-centered field at arbitrary points by periodic
    bilinear interpolation. `xy` has shape (..., 2); returns shape (...)."""
    g = f.grid
    u = xy[..., 0] / g.dx - 0.5
    w = xy[..., 1] / g.dy - 0.5
    i0 = np.floor(u).astype(int)
    j0 = np.floor(w).astype(int)
    fu = u - i0
    fw = w - j0
    i0 %= g.nx
    j0 %= g.ny
    i1 = (i0 + 1) % g.nx
    j1 = (j0 + 1) % g.ny
    v = f.values
    return (
        v[i0, j0] * (1 - fu) * (1 - fw)
        + v[i1, j0] * fu * (1 - fw)
        + v[i0, j1] * (1 - fu) * fw
        + v[i1, j1] * fu * fw
    )
