"""Microscale N-agent simulator.

Agents carry a fixed labour endowment 1/N0 (N0 = initial head count) and
move on the torus by Euler-Maruyama steps of

    dX_i = (1/c_M) grad v(X_i) dt + (sigma/c_M) dB_i,

where v is the systematic utility computed from the mollified empirical
density of the agents themselves. Births duplicate an agent in place via
per-step Poisson thinning.

Randomness is counter-based: every draw is a pure function of
(seed, stream_id, step counter, channel), with one stream id per agent.
Offspring receive fresh stream ids from a deterministic counter, so a run
is bitwise reproducible regardless of how the population grows, and agent
noise can be generated vectorized without per-agent generator objects.

Also here: the 1-D Nash equilibrium toy (velocity system, closed form,
explicit matrix inverse) and the spatial Gini index used to track its
contraction toward the barycenter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, DomainError, NumericError
from .grid import Grid2D, ScalarField, bilinear_sample, gradient
from .kernels import KernelSpec, ConvolutionPlan, discretize, mollifier_bandwidth_on_grid
from .economy import EconomyFields, ParamSet
from .rng import CH_BIRTH, CH_INIT, normal_pairs, uniforms


# ---------------------------------------------------------------------------
# population
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Population:
    """Agent positions plus the bookkeeping that keeps runs reproducible.

    unit_mass is fixed at 1/N0 for the whole run; offspring inherit it, so
    total carried mass is N_t / N0.
    """

    positions: np.ndarray          # (N, 2), wrapped into the domain
    unit_mass: float
    stream_ids: np.ndarray         # (N,) uint64
    t: float
    seed: int
    move_counter: int = 0
    birth_counter: int = 0
    next_stream_id: int = 0

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def mass(self) -> float:
        return self.count * self.unit_mass


def sample_from_density(density: ScalarField, N: int, seed: int) -> np.ndarray:
    """Draw N i.i.d. positions from a cell-piecewise-constant density.

    Cell choice by inverse CDF over cell masses, then uniform placement
    within the cell. Counter-based draws keep this platform-stable.
    """
    g = density.grid
    w = density.values.ravel()
    if np.any(w < 0):
        raise DomainError("sampling density must be nonnegative")
    total = w.sum()
    if not total > 0:
        raise DomainError("sampling density has no mass")
    cdf = np.cumsum(w) / total
    ids = np.arange(N, dtype=np.uint64)
    u_cell = uniforms(seed, ids, 0, CH_INIT, 0)
    u_x = uniforms(seed, ids, 0, CH_INIT, 1)
    u_y = uniforms(seed, ids, 0, CH_INIT, 2)
    flat = np.searchsorted(cdf, u_cell, side="left")
    flat = np.minimum(flat, w.size - 1)
    ci, cj = np.unravel_index(flat, g.shape)
    x = (ci + u_x) * g.dx
    y = (cj + u_y) * g.dy
    return np.stack([x % g.Lx, y % g.Ly], axis=-1)


def make_population(density: ScalarField, N: int, seed: int, t: float = 0.0) -> Population:
    if N < 1:
        raise ConfigurationError(f"population needs at least one agent, got {N}")
    pos = sample_from_density(density, N, seed)
    return Population(
        positions=pos,
        unit_mass=1.0 / N,
        stream_ids=np.arange(N, dtype=np.uint64),
        t=t,
        seed=seed,
        next_stream_id=N,
    )


def empirical_density(
    pop: Population, grid: Grid2D, lam: float,
    mollifier: ConvolutionPlan | None = None,
) -> ScalarField:
    """Mollified empirical density: cloud-in-cell deposit of unit_mass per
    agent, smoothed by an Epanechnikov bump of bandwidth max(N0^-lam,
    two cells). Integrates to N_t/N0 up to FFT rounding.

    Callers stepping in a loop should build the mollifier plan once and
    pass it in; the bandwidth depends only on the initial count.
    """
    if mollifier is None:
        n0 = int(round(1.0 / pop.unit_mass))
        h, _ = mollifier_bandwidth_on_grid(n0, lam, grid)
        mollifier = ConvolutionPlan(discretize(KernelSpec("epanechnikov", h), grid))
    raw = deposit_cic(pop.positions, grid, pop.unit_mass)
    return mollifier(raw)


def deposit_cic(positions: np.ndarray, grid: Grid2D, unit_mass: float) -> ScalarField:
    """Cloud-in-cell mass deposit, returned as a density (mass / cell area)."""
    u = positions[:, 0] / grid.dx - 0.5
    w = positions[:, 1] / grid.dy - 0.5
    i0 = np.floor(u).astype(int)
    j0 = np.floor(w).astype(int)
    fu = u - i0
    fw = w - j0
    i0 %= grid.nx
    j0 %= grid.ny
    i1 = (i0 + 1) % grid.nx
    j1 = (j0 + 1) % grid.ny
    vals = np.zeros(grid.shape)
    scale = unit_mass / grid.cell_area
    np.add.at(vals, (i0, j0), scale * (1 - fu) * (1 - fw))
    np.add.at(vals, (i1, j0), scale * fu * (1 - fw))
    np.add.at(vals, (i0, j1), scale * (1 - fu) * fw)
    np.add.at(vals, (i1, j1), scale * fu * fw)
    return ScalarField(grid, vals)


def step_agents(pop: Population, fields: EconomyFields, p: ParamSet, dt: float) -> Population:
    """One Euler-Maruyama step against a frozen field snapshot.

    Drift is the systematic-utility gradient interpolated bilinearly at
    each agent; noise is (sigma/c_M) sqrt(dt) times independent standard
    normals from each agent's stream.
    """
    if not dt > 0:
        raise ConfigurationError(f"time step must be positive, got {dt}")
    gv = gradient(fields.v)
    drift = np.stack(
        [
            bilinear_sample(ScalarField(gv.grid, gv.vx), pop.positions),
            bilinear_sample(ScalarField(gv.grid, gv.vy), pop.positions),
        ],
        axis=-1,
    )
    xi = normal_pairs(pop.seed, pop.stream_ids, pop.move_counter)
    new_pos = pop.positions + (dt / p.c_M) * drift + (p.sigma / p.c_M) * np.sqrt(dt) * xi
    return replace(
        pop,
        positions=gv.grid.wrap(new_pos),
        t=pop.t + dt,
        move_counter=pop.move_counter + 1,
    )


def spawn_births(pop: Population, n_field, dt: float) -> Population:
    """Poisson-thinned duplication: each agent independently duplicates
    with probability 1 - exp(-n(X_i) dt); offspring appear at the mother's
    location with fresh stream ids, appended in mother order."""
    if not dt > 0:
        raise ConfigurationError(f"time step must be positive, got {dt}")
    if isinstance(n_field, ScalarField):
        rate = bilinear_sample(n_field, pop.positions)
    else:
        rate = np.full(pop.count, float(n_field))
    if np.any(rate < 0):
        raise DomainError("birth rate must be nonnegative")
    prob = -np.expm1(-rate * dt)
    u = uniforms(pop.seed, pop.stream_ids, pop.birth_counter, CH_BIRTH, 0)
    mothers = np.nonzero(u < prob)[0]
    k = mothers.size
    if k == 0:
        return replace(pop, birth_counter=pop.birth_counter + 1)
    new_ids = np.arange(pop.next_stream_id, pop.next_stream_id + k, dtype=np.uint64)
    return replace(
        pop,
        positions=np.concatenate([pop.positions, pop.positions[mothers]], axis=0),
        stream_ids=np.concatenate([pop.stream_ids, new_ids]),
        birth_counter=pop.birth_counter + 1,
        next_stream_id=pop.next_stream_id + k,
    )


# ---------------------------------------------------------------------------
# 1-D Nash toy
# ---------------------------------------------------------------------------


@dataclass
class NashConfig1D:
    """Positions on the line plus movement cost and decision interval."""

    positions: np.ndarray
    c_M: float
    dt: float

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.size < 2:
            raise ConfigurationError("the Nash system needs at least two workers")
        if not self.c_M > 0:
            raise ConfigurationError(f"c_M must be positive, got {self.c_M}")
        if self.dt < 0:
            raise ConfigurationError(f"dt must be nonnegative, got {self.dt}")


def interaction_matrix(N: int, b: float) -> np.ndarray:
    """System matrix: 1 + (N-1) b on the diagonal, -b off it."""
    return (1.0 + N * b) * np.eye(N) - b * np.ones((N, N))


def interaction_matrix_inverse(N: int, b: float) -> np.ndarray:
    """Explicit inverse (I + b J) / (1 + N b), J the all-ones matrix."""
    return (np.eye(N) + b * np.ones((N, N))) / (1.0 + N * b)


def nash_velocities_1d(cfg: NashConfig1D) -> tuple[np.ndarray, np.ndarray]:
    """Equilibrium velocities, both by solving the linear system and by
    the closed form -(X - mean X)/(c_M + dt). The two must agree to 1e-12;
    disagreement means the linear algebra went wrong and raises."""
    x = cfg.positions
    N = x.size
    b = cfg.dt / (cfg.c_M * N)
    rhs = -(x - x.mean()) / cfg.c_M
    v_solve = np.linalg.solve(interaction_matrix(N, b), rhs)
    v_closed = -(x - x.mean()) / (cfg.c_M + cfg.dt)
    scale = max(1.0, float(np.abs(v_closed).max()))
    if np.abs(v_solve - v_closed).max() > 1e-12 * scale:
        raise NumericError("matrix solve and closed-form velocities disagree beyond 1e-12")
    return v_solve, v_closed


def nash_step(cfg: NashConfig1D) -> NashConfig1D:
    """Advance positions one decision interval along the equilibrium."""
    _, v = nash_velocities_1d(cfg)
    return NashConfig1D(cfg.positions + cfg.dt * v, cfg.c_M, cfg.dt)


def gini_spatial(positions: np.ndarray) -> float:
    """Spatial Gini of a 1-D configuration:
    (1/(2 mean)) (1/N) sum_ij |X_i - X_j|. Zero when everyone is at the
    same point (maximum agglomeration). Needs a positive mean."""
    x = np.asarray(positions, dtype=float)
    if x.size < 2:
        raise DomainError("spatial Gini needs at least two positions")
    mean = x.mean()
    if not mean > 0:
        raise DomainError(f"spatial Gini needs a positive mean position, got {mean}")
    xs = np.sort(x)
    n = xs.size
    pair_sum = 2.0 * float(np.dot(2.0 * np.arange(n) - n + 1.0, xs))
    return pair_sum / (2.0 * n * mean)
