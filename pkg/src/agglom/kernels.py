"""Kernel functions and periodic convolution.

The production-spillover kernel, the density mollifier, and the kernels
used to build test densities are all compactly supported radial bumps
scaled as k_h(z) = h^-2 k(z/h). Continuous shapes generally do not
integrate to one (the cone integrates to pi/3 on the unit disk), so every
discretized kernel is renormalized on its grid: cell_sum * dA == 1.

Discretization samples the profile at cell centers (midpoint rule) over
all periodic images, so kernels remain exactly symmetric under reflection
through the origin and wrap correctly even when h exceeds half the domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, ResolutionError
from .grid import Grid2D, ScalarField, require_same_grid

FAMILIES = ("quadratic_w", "cone", "epanechnikov", "custom_radial")

MIN_BANDWIDTH_CELLS = 2.0


def eval_utility_kernel_1d(z: float | np.ndarray) -> float | np.ndarray:
    """Quadratic utility bump: 1/2 (1 - z^2) inside |z| <= 1, 0 outside.

    Peaks at 1/2 when everyone is co-located; continuous at |z| = 1.
    """
    z = np.asarray(z, dtype=float)
    out = np.where(np.abs(z) <= 1.0, 0.5 * (1.0 - z * z), 0.0)
    return float(out) if out.ndim == 0 else out


def _profile(family: str, custom: Optional[Callable[[np.ndarray], np.ndarray]]):
    if family == "quadratic_w":
        return lambda r: np.where(r <= 1.0, 0.5 * (1.0 - r * r), 0.0)
    if family == "cone":
        return lambda r: np.where(r <= 1.0, 1.0 - r, 0.0)
    if family == "epanechnikov":
        return lambda r: np.maximum(1.0 - r * r, 0.0)
    if family == "custom_radial":
        if custom is None:
            raise ConfigurationError("custom_radial kernel needs a profile callable")
        return custom
    raise ConfigurationError(f"unknown kernel family {family!r}, expected one of {FAMILIES}")


@dataclass
class KernelSpec:
    """Shape family plus bandwidth; `normalization` is filled in by
    `discretize` with the constant that made the discrete kernel integrate
    to one on its grid."""

    family: str
    h: float
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    normalization: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(
                f"unknown kernel family {self.family!r}, expected one of {FAMILIES}"
            )
        if not self.h > 0:
            raise ConfigurationError(f"kernel bandwidth must be positive, got {self.h}")


def discretize(spec: KernelSpec, grid: Grid2D) -> ScalarField:
    """Periodic, origin-centered discrete kernel, normalized to unit mass.

    The kernel is stored with its center at cell (0, 0) so that FFT
    convolution introduces no phase shift. Raises ResolutionError when the
    bandwidth is under two cells (the bump would not be resolvable).
    """
    h = float(spec.h)
    if h < MIN_BANDWIDTH_CELLS * max(grid.dx, grid.dy):
        raise ResolutionError(
            f"bandwidth h={h} under {MIN_BANDWIDTH_CELLS} cells "
            f"(dx={grid.dx}, dy={grid.dy}); refine the grid or widen the kernel"
        )
    prof = _profile(spec.family, spec.profile)

    # signed displacement of cell i from the origin cell, in index units
    ix = np.arange(grid.nx)
    ix = np.where(ix <= grid.nx // 2, ix, ix - grid.nx)
    iy = np.arange(grid.ny)
    iy = np.where(iy <= grid.ny // 2, iy, iy - grid.ny)
    x = ix[:, None] * grid.dx
    y = iy[None, :] * grid.dy

    # sum over periodic images; m = 0 unless the support wraps the torus
    mx = int(np.ceil(max(0.0, (h - grid.Lx / 2.0)) / grid.Lx))
    my = int(np.ceil(max(0.0, (h - grid.Ly / 2.0)) / grid.Ly))
    vals = np.zeros(grid.shape)
    for ox in range(-mx, mx + 1):
        for oy in range(-my, my + 1):
            r = np.hypot(x + ox * grid.Lx, y + oy * grid.Ly) / h
            vals += prof(r)
    vals /= h * h

    total = vals.sum() * grid.cell_area
    if not total > 0:
        raise ResolutionError(f"kernel h={h} has no mass on this grid")
    vals /= total
    spec.normalization = 1.0 / total
    return ScalarField(grid, vals)


class ConvolutionPlan:
    """Cached-FFT periodic convolution against a fixed discretized kernel.

    This is the per-step cost center of the PDE solver; reuse one plan for
    a whole run.
    """

    def __init__(self, kernel: ScalarField):
        self.grid = kernel.grid
        self.kernel = kernel
        self.kernel_hat = np.fft.rfft2(kernel.values) * self.grid.cell_area

    def apply(self, values: np.ndarray) -> np.ndarray:
        out = np.fft.irfft2(np.fft.rfft2(values) * self.kernel_hat, s=self.grid.shape)
        if values.min() >= 0.0 and self.kernel.values.min() >= 0.0:
            np.maximum(out, 0.0, out=out)
        return out

    def __call__(self, f: ScalarField) -> ScalarField:
        require_same_grid(f, self.kernel)
        return ScalarField(self.grid, self.apply(f.values))


def convolve(f: ScalarField, k: ScalarField) -> ScalarField:
    """Periodic convolution (f * k) with Riemann-sum weighting, i.e. the
    discrete analogue of integral f(x - z) k(z) dz.

    Preserves the cell sum of f (the kernel integrates to one) and clips
    the ~1e-16 FFT undershoot when both inputs are nonnegative.
    """
    require_same_grid(f, k)
    return ConvolutionPlan(k)(f)


def mode_coefficient(kernel: ScalarField, mx: int, my: int) -> float:
    """Fourier coefficient of the discretized kernel at integer mode
    (mx, my): the factor by which convolution scales exp(2i pi (mx x/Lx +
    my y/Ly)). Real by symmetry; equals 1 at (0, 0)."""
    c = np.fft.fft2(kernel.values)[mx % kernel.grid.nx, my % kernel.grid.ny]
    return float(c.real) * kernel.grid.cell_area


def mollifier_bandwidth(N: int, lam: float) -> float:
    """Bandwidth N^-lam of the empirical-density mollifier.

    lam must lie in (0, 1/4); outside that range the agent-to-continuum
    limit argument breaks down, so it is rejected outright.
    """
    if not (0.0 < lam < 0.25):
        raise ConfigurationError(f"mollifier exponent must be in (0, 0.25), got {lam}")
    if not N >= 1:
        raise ConfigurationError(f"agent count must be >= 1, got {N}")
    return float(N) ** (-lam)


def mollifier_bandwidth_on_grid(N: int, lam: float, grid: Grid2D) -> tuple[float, bool]:
    """Mollifier bandwidth floored at two cells so it stays resolvable.

    Returns (h, floored); `floored` flags runs whose mollifier was widened
    beyond N^-lam by the grid floor.
    """
    h = mollifier_bandwidth(N, lam)
    floor = MIN_BANDWIDTH_CELLS * max(grid.dx, grid.dy)
    if h < floor:
        return floor, True
    return h, False
