"""Diagnostics: social utility algebra, Theil index, dispersion relation
against a brute-force modal-growth fit, cluster counting on the torus,
circular transport distances, and the representative-worker drift."""

import numpy as np
import pytest

from agglom.analysis import (
    MetricsRow,
    cluster_centroids,
    collect_metrics,
    count_clusters,
    critical_cM_scan,
    density_distance,
    dispersion_rate,
    entropy_integral,
    equilibrium_residual,
    max_dispersion_rate,
    mode_wavevector,
    representative_drift,
    social_utility,
    theil,
)
from agglom.economy import ParamSet, compute_fields
from agglom.errors import ConfigurationError, DomainError
from agglom.grid import ScalarField, constant_field, make_grid
from agglom.kernels import ConvolutionPlan, KernelSpec, discretize, mode_coefficient
from agglom.meanfield import SolverState, step


def baseline(grid, l_values, p=None):
    p = p or ParamSet()
    l = ScalarField(grid, np.asarray(l_values, dtype=float))
    G = constant_field(grid, 1.0)
    A_ES = constant_field(grid, 0.0)
    kernel = discretize(KernelSpec("cone", p.h), grid)
    return l, G, A_ES, p, kernel


# ---------------------------------------------------------------------------
# social utility
# ---------------------------------------------------------------------------

def test_social_utility_uniform_closed_form():
    # uniform state: SU = mass * v_bar - (sigma^2/2c_M) mass log(l_bar)
    g = make_grid(2, 2, 32, 32)
    lbar = 2.0
    l, G, A_ES, p, kernel = baseline(g, np.full(g.shape, lbar))
    fields = compute_fields(l, G, A_ES, p, kernel)
    su, agg_v, ent = social_utility(l, fields, p)
    mass = lbar * g.area
    vbar = fields.v.values[0, 0]
    assert agg_v == pytest.approx(mass * vbar, rel=1e-12)
    assert ent == pytest.approx(p.entropy_weight * mass * np.log(lbar), rel=1e-12)
    assert su == pytest.approx(agg_v - ent, rel=1e-12)
    # utility is equalized across locations at the uniform state
    assert np.ptp(fields.u.values) < 1e-12


def test_social_utility_zero_noise_is_aggregate_v():
    g = make_grid(2, 2, 32, 32)
    rng = np.random.default_rng(4)
    p = ParamSet(sigma=0.0)
    l, G, A_ES, _, kernel = baseline(g, rng.uniform(0.5, 2.0, g.shape), p)
    fields = compute_fields(l, G, A_ES, p, kernel)
    su, agg_v, ent = social_utility(l, fields, p)
    assert ent == 0.0
    assert su == agg_v


def test_social_utility_paper_weighting_switch():
    g = make_grid(2, 2, 32, 32)
    rng = np.random.default_rng(6)
    l, G, A_ES, p, kernel = baseline(g, rng.uniform(0.5, 2.0, g.shape))
    fields = compute_fields(l, G, A_ES, p, kernel)
    su_u, agg_v, ent_u = social_utility(l, fields, p, weighting="utility")
    su_p, agg_v2, ent_p = social_utility(l, fields, p, weighting="paper")
    assert agg_v == agg_v2
    # weights differ by a factor c_M
    assert ent_u == pytest.approx(p.c_M * ent_p, rel=1e-12)
    assert su_p == pytest.approx(agg_v - ent_p, rel=1e-12)
    with pytest.raises(ConfigurationError):
        social_utility(l, fields, p, weighting="bogus")


# ---------------------------------------------------------------------------
# Theil index
# ---------------------------------------------------------------------------

def test_theil_zero_iff_uniform():
    g = make_grid(4, 4, 64, 64)
    assert theil(constant_field(g, 0.37)) == 0.0
    rng = np.random.default_rng(1)
    bump = ScalarField(g, rng.uniform(0.5, 2.0, g.shape))
    assert theil(bump) > 1e-4


def test_theil_point_mass_value():
    g = make_grid(4, 4, 128, 128)
    vals = np.zeros(g.shape)
    vals[10, 10] = 1.0
    assert theil(ScalarField(g, vals)) == pytest.approx(np.log(128 * 128), rel=1e-12)
    assert theil(ScalarField(g, vals)) == pytest.approx(9.7040605, abs=1e-6)


def test_theil_scale_invariance_and_mixing_convexity():
    g = make_grid(2, 2, 32, 32)
    rng = np.random.default_rng(2)
    for _ in range(10):
        a_vals = rng.uniform(0.01, 3.0, g.shape)
        b_vals = rng.uniform(0.01, 3.0, g.shape)
        b_vals *= a_vals.sum() / b_vals.sum()  # equal masses
        a, b = ScalarField(g, a_vals), ScalarField(g, b_vals)
        mix = ScalarField(g, 0.5 * (a_vals + b_vals))
        assert theil(mix) <= 0.5 * (theil(a) + theil(b)) + 1e-12
        assert theil(ScalarField(g, 3.7 * a_vals)) == pytest.approx(theil(a), rel=1e-12)


def test_theil_rejects_zero_mass():
    g = make_grid(2, 2, 16, 16)
    with pytest.raises(DomainError):
        theil(constant_field(g, 0.0))


# ---------------------------------------------------------------------------
# dispersion relation
# ---------------------------------------------------------------------------

def test_dispersion_rate_zero_mode_neutral():
    p = ParamSet(beta=1.0)
    assert dispersion_rate((0.0, 0.0), p, 1.0, 1.0) == 0.0


def test_dispersion_rate_sign_structure():
    p = ParamSet(beta=1.0, sigma=2.0, c_M=1.0)
    # strong noise: negative at any k with modest kernel response
    assert dispersion_rate((1.0, 0.0), p, 1.0, 0.5) < 0
    p2 = ParamSet(beta=1.0, sigma=0.0, c_M=1.0)
    assert dispersion_rate((1.0, 0.0), p2, 1.0, 0.5) > 0


def test_measured_modal_growth_matches_dispersion_rate():
    # oracle: seed one cosine mode, fit the log-amplitude slope of its
    # Fourier coefficient over a short run of the full solver
    g = make_grid(4, 4, 64, 64)
    G = constant_field(g, 1.0)
    A_ES = constant_field(g, 0.0)
    p = ParamSet(beta=1.0, A0=1e-300, l_bar_reg=1e-9, sigma=0.05, c_M=0.01)
    kernel = discretize(KernelSpec("cone", p.h), g)
    plan = ConvolutionPlan(kernel)
    X, _ = g.meshgrid()
    m = 2
    k = mode_wavevector(g, m, 0)
    what = mode_coefficient(kernel, m, 0)
    predicted = dispersion_rate(k, p, 1.0, what)

    eps = 1e-6
    l = ScalarField(g, 1.0 + eps * np.cos(2 * np.pi * m * X / g.Lx))
    state = SolverState(l=l)
    dt = min(0.02 / abs(predicted), 2e-4)
    amps, times = [], []
    for i in range(60):
        amps.append(2 * np.abs(np.fft.fft2(state.l.values)[m, 0]) / state.l.values.size)
        times.append(state.t)
        state = step(state, p, G, A_ES, plan, dt=dt)
    slope = np.polyfit(times, np.log(amps), 1)[0]
    assert slope == pytest.approx(predicted, rel=0.05)


def test_critical_scan_brackets_sign_change():
    g = make_grid(4, 4, 64, 64)
    p = ParamSet(beta=1.0, sigma=0.05)
    kernel = discretize(KernelSpec("cone", p.h), g)
    lo, hi = critical_cM_scan(p, 1.0, kernel)
    assert lo < hi
    assert max_dispersion_rate(p.with_(c_M=lo), 1.0, kernel) < 0
    assert max_dispersion_rate(p.with_(c_M=hi), 1.0, kernel) > 0
    mid = 0.5 * (lo + hi)
    assert abs(max_dispersion_rate(p.with_(c_M=mid), 1.0, kernel)) <= 1e-8
    # analytic check: crossing at sigma^2 / (2 lbar max_k W_hat)
    from agglom.analysis import _mode_table
    _, what = _mode_table(kernel)
    c_star = p.sigma**2 / (2.0 * what.max())
    assert mid == pytest.approx(c_star, rel=1e-6)


def test_critical_scan_unstable_range_shrinks_with_h():
    # wider spillovers weaken the per-mode response on the torus, so the
    # critical movement cost rises (the unstable range shrinks)
    g = make_grid(4, 4, 64, 64)
    p = ParamSet(beta=1.0, sigma=0.05)
    crits = []
    for h in (0.3, 0.4, 0.6):
        kernel = discretize(KernelSpec("cone", h), g)
        lo, hi = critical_cM_scan(p, 1.0, kernel)
        crits.append(0.5 * (lo + hi))
    assert crits[0] < crits[1] < crits[2]


def test_critical_scan_sigma_zero_always_unstable():
    g = make_grid(4, 4, 64, 64)
    p = ParamSet(beta=1.0, sigma=0.0)
    kernel = discretize(KernelSpec("cone", 0.4), g)
    with pytest.raises(DomainError):
        critical_cM_scan(p, 1.0, kernel)


# ---------------------------------------------------------------------------
# cluster counting
# ---------------------------------------------------------------------------

def make_bumps(grid, centers, width=0.3, height=5.0):
    X, Y = grid.meshgrid()
    vals = np.full(grid.shape, 0.2)
    for cx, cy in centers:
        dx = (X - cx + grid.Lx / 2) % grid.Lx - grid.Lx / 2
        dy = (Y - cy + grid.Ly / 2) % grid.Ly - grid.Ly / 2
        vals += height * np.exp(-(dx**2 + dy**2) / width**2)
    return ScalarField(grid, vals)


def test_count_clusters_uniform_is_zero():
    g = make_grid(4, 4, 64, 64)
    assert count_clusters(constant_field(g, 1.3), 1.5) == 0


def test_count_clusters_four_bumps():
    g = make_grid(4, 4, 64, 64)
    f = make_bumps(g, [(1, 1), (3, 1), (1, 3), (3, 3)])
    assert count_clusters(f, 1.5) == 4


def test_count_clusters_wraps_around_seam():
    g = make_grid(4, 4, 64, 64)
    # one bump straddling the corner: must count once, not four times
    f = make_bumps(g, [(0.0, 0.0)])
    assert count_clusters(f, 1.5) == 1
    cents = cluster_centroids(f, 1.5)
    assert len(cents) == 1
    cx, cy = cents[0]
    assert min(cx, g.Lx - cx) < 0.1
    assert min(cy, g.Ly - cy) < 0.1


def test_count_clusters_invariances():
    g = make_grid(4, 4, 64, 64)
    f = make_bumps(g, [(1, 1), (2.5, 3)])
    n = count_clusters(f, 1.5)
    assert n == 2
    rolled = ScalarField(g, np.roll(f.values, (13, 27), axis=(0, 1)))
    assert count_clusters(rolled, 1.5) == n
    assert count_clusters(ScalarField(g, 42.0 * f.values), 1.5) == n


def test_count_clusters_threshold_validated():
    g = make_grid(4, 4, 64, 64)
    with pytest.raises(ConfigurationError):
        count_clusters(constant_field(g, 1.0), 1.0)


def test_cluster_centroids_match_bump_centers():
    g = make_grid(4, 4, 128, 128)
    centers = [(1.0, 1.0), (3.0, 2.5)]
    f = make_bumps(g, centers, width=0.25)
    cents = cluster_centroids(f, 1.5)
    assert len(cents) == 2
    found = {tuple(np.round(c, 1)) for c in cents}
    assert found == {(1.0, 1.0), (3.0, 2.5)}


# ---------------------------------------------------------------------------
# density distances
# ---------------------------------------------------------------------------

def test_density_distance_zero_for_identical():
    g = make_grid(4, 4, 64, 64)
    rng = np.random.default_rng(7)
    a = ScalarField(g, rng.uniform(0.1, 2.0, g.shape))
    l1, w1 = density_distance(a, a.copy())
    assert l1 == 0.0 and w1 == 0.0


def test_density_distance_translated_bump_transport_cost():
    # narrow bump translated by d along x costs min(d, Lx - d) * mass
    g = make_grid(4, 4, 128, 128)
    for d_cells in (8, 32, 96):
        a_vals = np.zeros(g.shape)
        a_vals[10:14, 60:64] = 3.0
        b_vals = np.roll(a_vals, d_cells, axis=0)
        a, b = ScalarField(g, a_vals), ScalarField(g, b_vals)
        mass = a.integral()
        d = d_cells * g.dx
        _, w1 = density_distance(a, b)
        want = min(d, g.Lx - d) * mass
        assert w1 == pytest.approx(want, rel=0.05)


def test_density_distance_l1_triangle_bound():
    g = make_grid(4, 4, 32, 32)
    rng = np.random.default_rng(9)
    for _ in range(10):
        a_vals = rng.uniform(0, 2.0, g.shape)
        b_vals = rng.uniform(0, 2.0, g.shape)
        b_vals *= a_vals.sum() / b_vals.sum()
        a, b = ScalarField(g, a_vals), ScalarField(g, b_vals)
        l1, _ = density_distance(a, b)
        assert l1 <= 2.0 * a.integral() + 1e-12


def test_density_distance_mass_mismatch_rejected():
    g = make_grid(4, 4, 32, 32)
    with pytest.raises(DomainError):
        density_distance(constant_field(g, 1.0), constant_field(g, 1.1))


# ---------------------------------------------------------------------------
# representative drift and equilibrium residual
# ---------------------------------------------------------------------------

def test_representative_drift_zero_at_uniform():
    g = make_grid(4, 4, 64, 64)
    l, G, A_ES, p, kernel = baseline(g, np.ones(g.shape))
    fields = compute_fields(l, G, A_ES, p, kernel)
    drift = representative_drift(l, fields.u, p)
    assert np.abs(drift).max() < 1e-12


def test_representative_drift_symmetric_bump_cancels():
    g = make_grid(4, 4, 128, 128)
    X, Y = g.meshgrid()
    r2 = (X - 2.0) ** 2 + (Y - 2.0) ** 2
    l = ScalarField(g, 0.1 + np.exp(-r2))
    l2, G, A_ES, p, kernel = baseline(g, l.values)
    fields = compute_fields(l2, G, A_ES, p, kernel)
    drift = representative_drift(l2, fields.u, p)
    gu = np.abs(np.gradient(fields.u.values)[0]).max() / g.dx
    assert np.linalg.norm(drift) < 1e-6 * max(1.0, l2.integral() * gu)


def test_representative_drift_asymmetric_bump_against_quadrature():
    # mid-transient asymmetric density with sigma = 0: the drift is
    # nonzero along the asymmetry axis and matches an independent
    # wrap-padded quadrature of l grad(u)
    g = make_grid(4, 4, 128, 128)
    X, _ = g.meshgrid()
    p = ParamSet(sigma=0.0)
    width = np.where(X < 1.6, 0.8, 0.2)  # skewed: heavy left shoulder
    vals = 0.1 + np.exp(-((X - 1.6) ** 2) / width)
    l, G, A_ES, _, kernel = baseline(g, vals, p)
    fields = compute_fields(l, G, A_ES, p, kernel)
    drift = representative_drift(l, fields.u, p)

    padded = np.pad(fields.u.values, ((1, 1), (0, 0)), mode="wrap")
    gu = np.gradient(padded, g.dx, axis=0)[1:-1]
    direct = 2.0 / p.c_M * (l.values * gu).sum() * g.cell_area
    assert abs(direct) > 0
    assert drift[0] == pytest.approx(direct, rel=1e-6)
    assert abs(drift[1]) < 1e-12 * abs(drift[0])
    # prefactor is configurable
    drift1 = representative_drift(l, fields.u, p, prefactor=1.0)
    assert drift1[0] == pytest.approx(0.5 * drift[0], rel=1e-12)


def test_equilibrium_residual_uniform_vs_bumped():
    g = make_grid(4, 4, 64, 64)
    l, G, A_ES, p, kernel = baseline(g, np.ones(g.shape))
    assert equilibrium_residual(l, p, G, A_ES, kernel) < 1e-12
    bump = make_bumps(g, [(2, 2)])
    assert equilibrium_residual(bump, p, G, A_ES, kernel) > 1e-3


def test_collect_metrics_row_contents():
    g = make_grid(4, 4, 64, 64)
    l, G, A_ES, p, kernel = baseline(g, np.ones(g.shape))
    state = SolverState(l=l, t=3.5)
    row = collect_metrics(state, p, G, A_ES, kernel)
    assert isinstance(row, MetricsRow)
    assert row.t == 3.5
    assert row.mass == pytest.approx(16.0)
    assert row.cluster_count == 0
    assert row.theil == pytest.approx(0.0, abs=1e-12)
    assert row.total_output == pytest.approx(16.0, rel=1e-12)
    assert row.max_density == pytest.approx(1.0)
    assert row.equilibrium_residual < 1e-12
    assert entropy_integral(l) == pytest.approx(0.0, abs=1e-12)
