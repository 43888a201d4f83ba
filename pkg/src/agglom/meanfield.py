"""Mass-conserving, positivity-preserving solver for the continuum limit

    dl/dt = n l + (sigma^2 / 2 c_M^2) Lap l
            - (1/c_M) div( l grad(w + A_EN + A_ES) )

on the torus. Space is discretized in finite-volume form: the advective
face flux upwinds the density on the sign of the face velocity, diffusion
uses the compact face difference, and cell updates are flux differences,
so total mass is conserved to rounding by telescoping (no renormalization
anywhere). Time is explicit Euler with a CFL-limited adaptive step.

The drift velocity is recomputed from the current density every step; the
spillover convolution inside it is the per-step hot spot, handled by a
cached-FFT ConvolutionPlan.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .errors import NumericError, SolverInstabilityError
from .grid import Grid2D, ScalarField
from .kernels import ConvolutionPlan
from .economy import EconomyFields, ParamSet, compute_fields

NEGATIVE_BUDGET = -1e-8

DEFAULT_SAFETY = 0.4
DEFAULT_DT_MAX = 0.05


@dataclass(eq=False)
class SolverState:
    """Density snapshot plus step bookkeeping.

    clamped_mass accumulates the (tiny) mass created by clamping rounding
    negatives back to zero; it stays many orders below the conservation
    budget unless the scheme is run outside its stability region.
    """

    l: ScalarField
    t: float = 0.0
    step_count: int = 0
    dt_last: float = 0.0
    clamped_mass: float = 0.0


def _plan(kernel: Union[ScalarField, ConvolutionPlan]) -> ConvolutionPlan:
    return kernel if isinstance(kernel, ConvolutionPlan) else ConvolutionPlan(kernel)


def _n_values(p: ParamSet, grid: Grid2D) -> Union[float, np.ndarray]:
    n = p.n_rate
    return n.values if isinstance(n, ScalarField) else float(n)


def _face_velocities(v: np.ndarray, grid: Grid2D, c_M: float) -> tuple[np.ndarray, np.ndarray]:
    """Drift velocity normal to each east/north face: potential difference
    across the face over the spacing, divided by c_M. Vx[i, j] is the face
    between cells (i, j) and (i+1, j)."""
    vx = (np.roll(v, -1, axis=0) - v) / (grid.dx * c_M)
    vy = (np.roll(v, -1, axis=1) - v) / (grid.dy * c_M)
    return vx, vy


def _face_fluxes(
    l: np.ndarray, vx: np.ndarray, vy: np.ndarray, D: float, grid: Grid2D
) -> tuple[np.ndarray, np.ndarray]:
    lxp = np.roll(l, -1, axis=0)
    lyp = np.roll(l, -1, axis=1)
    fx = np.where(vx >= 0.0, l, lxp) * vx - D * (lxp - l) / grid.dx
    fy = np.where(vy >= 0.0, l, lyp) * vy - D * (lyp - l) / grid.dy
    return fx, fy


def _flux_divergence(fx: np.ndarray, fy: np.ndarray, grid: Grid2D) -> np.ndarray:
    return (fx - np.roll(fx, 1, axis=0)) / grid.dx + (fy - np.roll(fy, 1, axis=1)) / grid.dy


def _assemble(
    l: ScalarField,
    p: ParamSet,
    G: ScalarField,
    A_ES: ScalarField,
    plan: ConvolutionPlan,
) -> tuple[EconomyFields, np.ndarray, np.ndarray, np.ndarray]:
    """Fields, face velocities and the full right-hand side for a state."""
    fields = compute_fields(l, G, A_ES, p, plan)
    if not np.isfinite(fields.v.values).all():
        raise NumericError("non-finite drift potential; density may have collapsed")
    vx, vy = _face_velocities(fields.v.values, l.grid, p.c_M)
    fx, fy = _face_fluxes(l.values, vx, vy, p.diffusivity, l.grid)
    rhs_vals = _n_values(p, l.grid) * l.values - _flux_divergence(fx, fy, l.grid)
    return fields, vx, vy, rhs_vals


def rhs(
    l: ScalarField,
    p: ParamSet,
    G: ScalarField,
    A_ES: ScalarField,
    kernel: Union[ScalarField, ConvolutionPlan],
) -> ScalarField:
    """Instantaneous rate of change of the density field.

    Assembled from face fluxes, so its cell sum times cell area equals the
    growth contribution exactly (zero when n == 0)."""
    _, _, _, vals = _assemble(l, p, G, A_ES, _plan(kernel))
    if not np.isfinite(vals).all():
        raise NumericError("non-finite right-hand side")
    return ScalarField(l.grid, vals)


def _dt_bounds(
    vx: np.ndarray, vy: np.ndarray, p: ParamSet, grid: Grid2D
) -> tuple[float, float]:
    D = p.diffusivity
    if D > 0:
        dt_diff = 1.0 / (2.0 * D * (1.0 / grid.dx**2 + 1.0 / grid.dy**2))
    else:
        dt_diff = np.inf
    speed = float(np.abs(vx).max()) / grid.dx + float(np.abs(vy).max()) / grid.dy
    dt_adv = 1.0 / speed if speed > 0 else np.inf
    return dt_diff, dt_adv


def _reaction_bound(l: ScalarField, fields: EconomyFields, p: ParamSet) -> float:
    """Stiffness bound from the local utility response.

    Where dv/dl < 0 (wage crowding, amenity congestion) the drift term
    behaves like a nonlinear diffusion with coefficient l |dv/dl| / c_M,
    which explicit Euler must resolve at the grid Nyquist mode or
    checkerboard noise is amplified. Uses l dv/dl, which stays finite as
    l -> 0:
        l dw/dl    = A_l l g'(l)
        l dA_EN/dl = A0 (phi beta (tau y)^phi - mu_A l).
    """
    g = l.grid
    lv = l.values
    lbar = p.l_bar_reg
    # l * d(regularized power)/dl on each branch
    lgp = np.where(
        lv > lbar,
        (p.beta - 1.0) * np.power(np.maximum(lv, lbar), p.beta - 1.0),
        -lv * lbar ** (p.beta - 2.0),
    )
    l_dv_dl = fields.A_l.values * lgp + p.A0 * (
        p.phi * p.beta * np.power(p.tau * fields.y.values, p.phi) - p.mu_A * lv
    )
    q = float(np.maximum(0.0, -l_dv_dl).max()) / p.c_M
    if q <= 0.0:
        return np.inf
    k2max = 4.0 / g.dx**2 + 4.0 / g.dy**2
    return 2.0 / (q * k2max)


def stable_dt(
    l: ScalarField,
    p: ParamSet,
    G: ScalarField,
    A_ES: ScalarField,
    kernel: Union[ScalarField, ConvolutionPlan],
    safety: float = DEFAULT_SAFETY,
    dt_max: float = DEFAULT_DT_MAX,
) -> float:
    """Largest safe explicit step for the current state.

    safety scales the diffusion bound (dx^2 c_M^2 / 2 sigma^2 on a square
    grid), the advective CFL bound, and the local-response stiffness bound
    (see _reaction_bound); dt_max caps the result and is what is returned
    when no mechanism is active. Never zero.
    """
    if not 0 < safety <= 1:
        raise NumericError(f"safety must be in (0, 1], got {safety}")
    fields, vx, vy, _ = _assemble(l, p, G, A_ES, _plan(kernel))
    dt_diff, dt_adv = _dt_bounds(vx, vy, p, l.grid)
    dt_react = _reaction_bound(l, fields, p)
    return float(min(safety * dt_diff, safety * dt_adv, safety * dt_react, dt_max))


def _apply_update(
    state: SolverState, rhs_vals: np.ndarray, dt: float, safety: float
) -> SolverState:
    """Euler update with the positivity budget enforced."""
    new_vals = state.l.values + dt * rhs_vals
    if not np.isfinite(new_vals).all():
        raise NumericError(f"non-finite density after step at t={state.t}")
    lo = float(new_vals.min())
    clamped = state.clamped_mass
    if lo < 0.0:
        if lo < NEGATIVE_BUDGET:
            raise SolverInstabilityError(
                f"density reached {lo:.3e} (< {NEGATIVE_BUDGET}) at t={state.t}; "
                f"lower the safety factor (currently {safety})"
            )
        neg = new_vals < 0.0
        clamped += float(-new_vals[neg].sum()) * state.l.grid.cell_area
        new_vals[neg] = 0.0

    return SolverState(
        l=ScalarField(state.l.grid, new_vals),
        t=state.t + dt,
        step_count=state.step_count + 1,
        dt_last=dt,
        clamped_mass=clamped,
    )


def _advance(
    state: SolverState,
    p: ParamSet,
    G: ScalarField,
    A_ES: ScalarField,
    plan: ConvolutionPlan,
    safety: float,
    dt_max: float,
    dt_cap: float = np.inf,
) -> SolverState:
    """One assembled Euler update; dt = stability bound capped by dt_cap."""
    fields, vx, vy, rhs_vals = _assemble(state.l, p, G, A_ES, plan)
    dt_diff, dt_adv = _dt_bounds(vx, vy, p, state.l.grid)
    dt_react = _reaction_bound(state.l, fields, p)
    dt = float(min(safety * dt_diff, safety * dt_adv, safety * dt_react, dt_max, dt_cap))
    return _apply_update(state, rhs_vals, dt, safety)


def step(
    state: SolverState,
    p: ParamSet,
    G: ScalarField,
    A_ES: ScalarField,
    kernel: Union[ScalarField, ConvolutionPlan],
    safety: float = DEFAULT_SAFETY,
    dt_max: float = DEFAULT_DT_MAX,
    dt: Optional[float] = None,
) -> SolverState:
    """Advance one explicit Euler step.

    With dt=None the step size comes from the stability bounds scaled by
    `safety`; an explicit dt is honored exactly (the caller owns stability
    then). Rounding negatives inside the budget are clamped to zero and
    accounted in clamped_mass; anything below the budget raises
    SolverInstabilityError.
    """
    if dt is None:
        return _advance(state, p, G, A_ES, _plan(kernel), safety, dt_max)
    _, _, _, rhs_vals = _assemble(state.l, p, G, A_ES, _plan(kernel))
    return _apply_update(state, rhs_vals, float(dt), safety)


@dataclass(eq=False)
class Trajectory:
    """In-memory result of a PDE run: metric rows at the sampling cadence
    plus density snapshots at the requested times."""

    metrics: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)   # (t, ScalarField)
    final: Optional[SolverState] = None
    meta: dict = field(default_factory=dict)


def run(scenario) -> Trajectory:
    """Integrate a scenario to its horizon, emitting snapshots at its
    snapshot times and metric rows every metrics_interval.

    Deterministic: the initial condition (including any seeded
    perturbation) and the stability-bounded step sequence are pure
    functions of the scenario.
    """
    from . import analysis  # metrics assembly; analysis imports this module

    grid = scenario.make_grid()
    l0 = scenario.initial_density(grid)
    G = scenario.G_field(grid)
    A_ES = scenario.A_ES_field(grid)
    p = scenario.params
    plan = ConvolutionPlan(scenario.spillover_kernel(grid))

    state = SolverState(l=l0)
    traj = Trajectory(meta=scenario.metadata())

    snap_times = sorted(set(float(t) for t in scenario.snapshot_times))
    emit_metrics_t = 0.0
    horizon = float(scenario.T)

    def emit_metrics(s: SolverState):
        traj.metrics.append(
            analysis.collect_metrics(
                s, p, G, A_ES, plan, rel_threshold=scenario.cluster_rel_threshold
            )
        )

    for ts in snap_times:
        if ts <= 0.0:
            traj.snapshots.append((0.0, state.l.copy()))
    emit_metrics(state)
    last_metrics_t = 0.0
    next_snap = [t for t in snap_times if t > 0.0]

    while state.t < horizon - 1e-12:
        targets = [horizon, emit_metrics_t + scenario.metrics_interval]
        if next_snap:
            targets.append(next_snap[0])
        t_stop = min(targets)
        state = _advance(
            state, p, G, A_ES, plan,
            scenario.safety, scenario.dt_max,
            dt_cap=t_stop - state.t,
        )
        if abs(state.t - t_stop) < 1e-12:
            state.t = t_stop
        if next_snap and state.t >= next_snap[0] - 1e-12:
            traj.snapshots.append((state.t, state.l.copy()))
            next_snap.pop(0)
        if state.t >= emit_metrics_t + scenario.metrics_interval - 1e-12:
            emit_metrics(state)
            emit_metrics_t = state.t
            last_metrics_t = state.t

    if last_metrics_t < horizon - 1e-12:
        emit_metrics(state)

    traj.final = state
    traj.meta["steps"] = state.step_count
    traj.meta["clamped_mass"] = state.clamped_mass
    return traj
