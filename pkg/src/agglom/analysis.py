"""Welfare, stability, equilibrium and convergence diagnostics.

Social utility is reported in the utility-consistent form

    SU = integral l v dx  -  (sigma^2 / 2 c_M) integral l log l dx,

i.e. the population integral of total utility. An alternative weighting
(sigma^2 / 2 c_M^2 on the entropy integral) is selectable for comparison
plots; the two are not algebraically equivalent and neither is silently
corrected into the other.

The dispersion relation applies to the linearization around a uniform
state with beta = 1 and amenities switched off:

    rate(k) = |k|^2 ( l_bar W_hat(k) / c_M - sigma^2 / (2 c_M^2) ),

with W_hat(k) the Fourier coefficient of the discretized spillover
kernel. Positive rates grow; the sign flips in c_M at a single critical
value, bracketed by `critical_cM_scan`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, DomainError
from .grid import ScalarField, gradient, require_same_grid, Grid2D
from .kernels import ConvolutionPlan
from .economy import (
    LOG_DENSITY_FLOOR,
    EconomyFields,
    ParamSet,
    compute_fields,
)
from . import meanfield

_EIGHT_CONN = np.ones((3, 3), dtype=int)


@dataclass
class MetricsRow:
    """One line of the run-time diagnostics series."""

    t: float
    mass: float
    SU: float
    aggregate_v: float
    entropy_term: float
    theil: float
    total_output: float
    max_density: float
    cluster_count: int
    rep_drift_norm: float
    equilibrium_residual: float

    FIELDS = (
        "t", "mass", "SU", "aggregate_v", "entropy_term", "theil",
        "total_output", "max_density", "cluster_count", "rep_drift_norm",
        "equilibrium_residual",
    )


def social_utility(
    l: ScalarField,
    fields: EconomyFields,
    p: ParamSet,
    weighting: str = "utility",
) -> tuple[float, float, float]:
    """(SU, aggregate systematic utility, entropy term).

    aggregate_v = integral l v; entropy_term carries the weight of the
    selected form (sigma^2/2c_M for "utility", sigma^2/2c_M^2 for
    "paper"); SU is their difference.
    """
    if weighting == "utility":
        weight = p.entropy_weight
    elif weighting == "paper":
        weight = p.diffusivity
    else:
        raise ConfigurationError(f"unknown SU weighting {weighting!r}")
    dA = l.grid.cell_area
    lv = l.values
    aggregate_v = float((lv * fields.v.values).sum()) * dA
    ent = weight * float((lv * np.log(np.maximum(lv, LOG_DENSITY_FLOOR))).sum()) * dA
    return aggregate_v - ent, aggregate_v, ent


def entropy_integral(l: ScalarField) -> float:
    """Raw integral l log l, the quantity whose weighted negative is the
    inequality component of social utility."""
    lv = l.values
    return float((lv * np.log(np.maximum(lv, LOG_DENSITY_FLOOR))).sum()) * l.grid.cell_area


def theil(l: ScalarField) -> float:
    """Theil index of spatial density inequality, normalized to 0 at the
    uniform distribution: integral (l/M) log((l/M) |Omega|)."""
    lv = l.values
    if np.any(lv < 0):
        raise DomainError("Theil index needs a nonnegative density")
    M = l.integral()
    if not M > 0:
        raise DomainError("Theil index needs positive total mass")
    r = lv / M
    pos = r > 0
    out = float((r[pos] * np.log(r[pos] * l.grid.area)).sum()) * l.grid.cell_area
    return max(out, 0.0) if out > -1e-12 else out


def mode_wavevector(grid: Grid2D, mx: int, my: int) -> tuple[float, float]:
    """Physical wavevector (radians per length) of integer mode (mx, my)."""
    return (2.0 * np.pi * mx / grid.Lx, 2.0 * np.pi * my / grid.Ly)


def dispersion_rate(
    k: Union[float, Sequence[float]],
    p: ParamSet,
    l_bar: float,
    kernel_hat: float,
) -> float:
    """Linear growth rate of the Fourier mode with wavevector k around the
    uniform density l_bar (beta = 1, no amenities regime)."""
    k_arr = np.atleast_1d(np.asarray(k, dtype=float))
    k2 = float((k_arr**2).sum())
    return k2 * (l_bar * kernel_hat / p.c_M - p.diffusivity)


def _mode_table(kernel: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """(|k|^2, W_hat) over every nonzero grid mode."""
    g = kernel.grid
    kx = 2.0 * np.pi * np.fft.fftfreq(g.nx, d=g.dx)
    ky = 2.0 * np.pi * np.fft.fftfreq(g.ny, d=g.dy)
    k2 = kx[:, None] ** 2 + ky[None, :] ** 2
    what = np.fft.fft2(kernel.values).real * g.cell_area
    mask = k2 > 0
    return k2[mask], what[mask]


def max_dispersion_rate(p: ParamSet, l_bar: float, kernel: ScalarField) -> float:
    """max over nonzero grid modes of the dispersion rate."""
    k2, what = _mode_table(kernel)
    return float((k2 * (l_bar * what / p.c_M - p.diffusivity)).max())


def critical_cM_scan(
    p_base: ParamSet,
    l_bar: float,
    kernel: ScalarField,
    c_lo: float = 1e-8,
    c_hi: float = 1e8,
    rate_tol: float = 1e-8,
) -> tuple[float, float]:
    """Bisect c_M for the sign of the maximal dispersion rate.

    Returns the final bracket (c_lower, c_upper): stable at c_lower,
    unstable at c_upper, max rate within rate_tol of zero at the
    midpoint. Raises DomainError when no sign change exists in
    [c_lo, c_hi] (e.g. every kernel mode coefficient is <= 0, or sigma
    is 0 so every c_M is unstable).
    """
    k2, what = _mode_table(kernel)

    def max_rate(c: float) -> float:
        return float((k2 * (l_bar * what / c - p_base.sigma**2 / (2.0 * c * c))).max())

    lo, hi = float(c_lo), float(c_hi)
    r_lo, r_hi = max_rate(lo), max_rate(hi)
    if not (r_lo < 0.0 < r_hi):
        raise DomainError(
            f"no stability transition in c_M range [{c_lo}, {c_hi}]: "
            f"max rate {r_lo:.3e} at the low end, {r_hi:.3e} at the high end"
        )
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        r_mid = max_rate(mid)
        if abs(r_mid) <= rate_tol:
            if r_mid >= 0.0:
                hi = mid
            else:
                lo = mid
            break
        if r_mid > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= np.finfo(float).eps * hi:
            break
    return lo, hi


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _periodic_labels(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labels on the torus: plain scipy labels with
    the components touching across the periodic seams merged. Returns the
    canonicalized label array and the component count."""
    labels, n = ndimage.label(mask, structure=_EIGHT_CONN)
    if n == 0:
        return labels, 0
    uf = _UnionFind(n + 1)

    def merge_seam(a: np.ndarray, b: np.ndarray) -> None:
        for shift in (-1, 0, 1):
            bs = np.roll(b, shift)
            both = (a > 0) & (bs > 0)
            for la, lb in zip(a[both], bs[both]):
                uf.union(int(la), int(lb))

    merge_seam(labels[-1, :], labels[0, :])
    merge_seam(labels[:, -1], labels[:, 0])
    root_of = np.array([0] + [uf.find(i) for i in range(1, n + 1)])
    canon = root_of[labels]
    return canon, len(set(root_of[1:]))


def count_clusters(l: ScalarField, rel_threshold: float = 1.5) -> int:
    """Number of 8-connected periodic components of {l > threshold * mean}.

    The threshold is relative, so the count is invariant under positive
    rescaling of the density and under torus translation.
    """
    if not rel_threshold > 1.0:
        raise ConfigurationError(f"relative threshold must exceed 1, got {rel_threshold}")
    mean = float(l.values.mean())
    mask = l.values > rel_threshold * mean
    _, n = _periodic_labels(mask)
    return n


def cluster_centroids(l: ScalarField, rel_threshold: float = 1.5) -> np.ndarray:
    """Mass-weighted centroid of each superlevel component, computed with
    circular means so clusters straddling the seam land in the right
    place. Returns an (n, 2) array."""
    if not rel_threshold > 1.0:
        raise ConfigurationError(f"relative threshold must exceed 1, got {rel_threshold}")
    g = l.grid
    mean = float(l.values.mean())
    mask = l.values > rel_threshold * mean
    canon, n = _periodic_labels(mask)
    if n == 0:
        return np.zeros((0, 2))
    X, Y = g.meshgrid()
    tx = 2.0 * np.pi * X / g.Lx
    ty = 2.0 * np.pi * Y / g.Ly
    out = []
    for root in sorted(set(canon[canon > 0].ravel())):
        sel = canon == root
        m = l.values[sel]
        cx = np.angle(np.sum(m * np.exp(1j * tx[sel]))) % (2 * np.pi)
        cy = np.angle(np.sum(m * np.exp(1j * ty[sel]))) % (2 * np.pi)
        out.append((cx * g.Lx / (2 * np.pi), cy * g.Ly / (2 * np.pi)))
    return np.asarray(out)


def _circular_w1(pa: np.ndarray, pb: np.ndarray, dx: float) -> float:
    """W1 between two equal-mass densities on a ring: the cumulative
    difference, recentered by its median (the optimal cyclic offset),
    integrated in absolute value."""
    F = np.cumsum(pa - pb) * dx
    return float(np.abs(F - np.median(F)).sum()) * dx


def density_distance(a: ScalarField, b: ScalarField) -> tuple[float, float]:
    """(L1, sliced circular W1) between equal-mass densities.

    The sliced distance sums the circular 1-D W1 of the two axis
    marginals, so a pure x-translation of a narrow bump by d costs
    min(d, Lx - d) times the mass.
    """
    require_same_grid(a, b)
    Ma, Mb = a.integral(), b.integral()
    if abs(Ma - Mb) > 1e-6 * max(1.0, abs(Ma), abs(Mb)):
        raise DomainError(f"density masses differ: {Ma} vs {Mb}")
    g = a.grid
    l1 = float(np.abs(a.values - b.values).sum()) * g.cell_area
    pax = a.values.sum(axis=1) * g.dy
    pbx = b.values.sum(axis=1) * g.dy
    pay = a.values.sum(axis=0) * g.dx
    pby = b.values.sum(axis=0) * g.dx
    w1 = _circular_w1(pax, pbx, g.dx) + _circular_w1(pay, pby, g.dy)
    return l1, w1


def representative_drift(
    l: ScalarField, u: ScalarField, p: ParamSet, prefactor: float = 2.0
) -> np.ndarray:
    """Expected movement of the representative worker:
    (prefactor / c_M) integral l grad u dx. The prefactor defaults to 2;
    integrating the continuity equation by parts gives 1, so it is left
    configurable."""
    require_same_grid(l, u)
    gu = gradient(u)
    dA = l.grid.cell_area
    ix = float((l.values * gu.vx).sum()) * dA
    iy = float((l.values * gu.vy).sum()) * dA
    return (prefactor / p.c_M) * np.array([ix, iy])


def equilibrium_residual(
    state_or_l, p: ParamSet, G: ScalarField, A_ES: ScalarField, kernel
) -> float:
    """L2 norm of the PDE right-hand side; zero at a long-run equilibrium."""
    l = state_or_l.l if isinstance(state_or_l, meanfield.SolverState) else state_or_l
    r = meanfield.rhs(l, p, G, A_ES, kernel)
    return float(np.sqrt((r.values**2).sum() * l.grid.cell_area))


def collect_metrics(
    state, p: ParamSet, G: ScalarField, A_ES: ScalarField, kernel,
    rel_threshold: float = 1.5,
) -> MetricsRow:
    """Assemble one diagnostics row for a solver state."""
    l = state.l if isinstance(state, meanfield.SolverState) else state
    t = state.t if isinstance(state, meanfield.SolverState) else 0.0
    plan = kernel if isinstance(kernel, ConvolutionPlan) else ConvolutionPlan(kernel)
    fields = compute_fields(l, G, A_ES, p, plan)
    su, agg_v, ent = social_utility(l, fields, p)
    drift = representative_drift(l, fields.u, p)
    return MetricsRow(
        t=float(t),
        mass=l.integral(),
        SU=su,
        aggregate_v=agg_v,
        entropy_term=ent,
        theil=theil(l),
        total_output=fields.y.integral(),
        max_density=float(l.values.max()),
        cluster_count=count_clusters(l, rel_threshold),
        rep_drift_norm=float(np.linalg.norm(drift)),
        equilibrium_residual=equilibrium_residual(l, p, G, A_ES, plan),
    )
