"""Scenario definitions, the built-in catalog, config parsing, and the
runners that tie the PDE solver and the agent simulator together.

A Scenario is the unit of reproducibility: domain, parameters, initial
condition, output schedule, and mode. Config files are INI-style with one
flat section per concern; unknown sections or keys are rejected so typos
fail loudly. An empty config is the full baseline scenario.

Initial densities are normalized to `total_mass`. The defaults keep unit
mass; the dynamical built-ins (megacity and friends) normalize to mean
density one instead (mass = area), which keeps wage and amenity levels
of order one so the qualitative regimes appear within practical horizons.
Agent-mode runs require total_mass == 1: each agent carries 1/N0 of unit
aggregate labour by construction.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import meanfield, microsim, snapshots
from .analysis import collect_metrics, density_distance
from .economy import ParamSet, compute_fields
from .errors import ConfigurationError
from .grid import Grid2D, ScalarField, constant_field, make_grid
from .kernels import ConvolutionPlan, KernelSpec, discretize
from .rng import normal_field

INIT_KINDS = ("uniform", "strip", "epanechnikov", "file")
MODES = ("pde", "agents", "both")


@dataclass(eq=False)
class InitSpec:
    """Initial density recipe; which fields apply depends on `kind`."""

    kind: str = "uniform"
    amplitude: float = 1e-2          # uniform: relative perturbation size
    seed: int = 0                    # uniform: perturbation seed
    smooth: bool = True              # uniform: band-limit the seeded noise
    smooth_scale: Optional[float] = None   # noise correlation length; None = spillover h
    rect: tuple = (1.0, 2.0, 1.0, 7.0)   # strip: (x0, x1, y0, y1)
    center: tuple = (2.0, 2.0)       # epanechnikov: bump center
    centers: Optional[tuple] = None  # epanechnikov: several equal bumps
    h_E: float = 0.4                 # epanechnikov: bump bandwidth
    path: Optional[str] = None       # file: snapshot to load

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ConfigurationError(
                f"init.kind must be one of {INIT_KINDS}, got {self.kind!r}"
            )
        if self.amplitude < 0:
            raise ConfigurationError(f"init.amplitude must be >= 0, got {self.amplitude}")


@dataclass(eq=False)
class Scenario:
    """Everything needed to reproduce one run byte-for-byte."""

    name: str = "baseline"
    Lx: float = 4.0
    Ly: float = 4.0
    nx: int = 128
    ny: int = 128
    params: ParamSet = field(default_factory=ParamSet)
    init: InitSpec = field(default_factory=InitSpec)
    G_value: float = 1.0
    G_path: Optional[str] = None
    A_ES_value: float = 0.0
    A_ES_path: Optional[str] = None
    T: float = 20.0
    snapshot_times: tuple = (0.0, 1.0, 5.0, 10.0, 20.0)
    metrics_interval: float = 0.5
    mode: str = "pde"
    n_agents: int = 10000
    total_mass: float = 1.0
    safety: float = meanfield.DEFAULT_SAFETY
    dt_max: float = meanfield.DEFAULT_DT_MAX
    cluster_rel_threshold: float = 1.5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.T > 0:
            raise ConfigurationError(f"horizon T must be positive, got {self.T}")
        if not self.metrics_interval > 0:
            raise ConfigurationError("metrics_interval must be positive")
        for t in self.snapshot_times:
            if not 0.0 <= t <= self.T:
                raise ConfigurationError(
                    f"snapshot time {t} outside [0, T={self.T}]"
                )
        if not self.total_mass > 0:
            raise ConfigurationError("total_mass must be positive")
        if self.mode in ("agents", "both") and abs(self.total_mass - 1.0) > 1e-12:
            raise ConfigurationError(
                "agent-mode scenarios need total_mass = 1 (each agent carries 1/N of unit labour)"
            )

    # -- materialization ----------------------------------------------------

    def make_grid(self) -> Grid2D:
        return make_grid(self.Lx, self.Ly, self.nx, self.ny)

    def spillover_kernel(self, grid: Grid2D) -> ScalarField:
        return discretize(KernelSpec("cone", self.params.h), grid)

    def _load_or_const(self, path: Optional[str], value: float, grid: Grid2D) -> ScalarField:
        if path is None:
            return constant_field(grid, value)
        return snapshots.read_field(path, grid=grid)

    def G_field(self, grid: Grid2D) -> ScalarField:
        return self._load_or_const(self.G_path, self.G_value, grid)

    def A_ES_field(self, grid: Grid2D) -> ScalarField:
        return self._load_or_const(self.A_ES_path, self.A_ES_value, grid)

    def _perturbation(self, grid: Grid2D) -> np.ndarray:
        """Seeded mean-zero unit-std noise field, band-limited at the
        configured correlation scale (spillover bandwidth by default)."""
        init = self.init
        noise = normal_field(init.seed, grid.shape)
        if init.smooth:
            scale = init.smooth_scale if init.smooth_scale is not None else self.params.h
            bump = discretize(
                KernelSpec("epanechnikov", max(scale, 4 * max(grid.dx, grid.dy))),
                grid,
            )
            noise = ConvolutionPlan(bump).apply(noise)
        noise -= noise.mean()
        sd = noise.std()
        return noise / sd if sd > 0 else noise

    def initial_density(self, grid: Grid2D) -> ScalarField:
        init = self.init
        if init.kind == "uniform":
            vals = np.ones(grid.shape)
        elif init.kind == "strip":
            x0, x1, y0, y1 = init.rect
            X, Y = grid.meshgrid()
            vals = ((X >= x0) & (X < x1) & (Y >= y0) & (Y < y1)).astype(float)
            if not vals.any():
                raise ConfigurationError(f"strip {init.rect} covers no cells")
        elif init.kind == "epanechnikov":
            X, Y = grid.meshgrid()
            vals = np.zeros(grid.shape)
            for cx, cy in (init.centers or (init.center,)):
                dx = (X - cx + grid.Lx / 2) % grid.Lx - grid.Lx / 2
                dy = (Y - cy + grid.Ly / 2) % grid.Ly - grid.Ly / 2
                vals += np.maximum(1.0 - (dx**2 + dy**2) / init.h_E**2, 0.0)
            if not vals.any():
                raise ConfigurationError(f"epanechnikov bump h_E={init.h_E} covers no cells")
        elif init.kind == "file":
            if init.path is None:
                raise ConfigurationError("init.kind=file needs init.path")
            vals = snapshots.read_field(init.path, grid=grid).values.copy()
            if np.any(vals < 0):
                raise ConfigurationError(f"file density {init.path} has negative cells")
        else:  # pragma: no cover - guarded in InitSpec
            raise ConfigurationError(f"unhandled init kind {init.kind}")

        if init.kind != "file" and init.amplitude > 0:
            vals = vals * (1.0 + init.amplitude * self._perturbation(grid))
            np.maximum(vals, 0.0, out=vals)

        total = vals.sum() * grid.cell_area
        if not total > 0:
            raise ConfigurationError("initial density has no mass")
        vals *= self.total_mass / total
        return ScalarField(grid, vals)

    def metadata(self) -> dict:
        return {
            "name": self.name,
            "Lx": self.Lx, "Ly": self.Ly, "nx": self.nx, "ny": self.ny,
            "T": self.T,
            "mode": self.mode,
            "seed": self.init.seed,
            "init_kind": self.init.kind,
            "init_amplitude": self.init.amplitude,
            "total_mass": self.total_mass,
            "safety": self.safety,
            "dt_max": self.dt_max,
            "c_M": self.params.c_M, "sigma": self.params.sigma,
            "beta": self.params.beta, "h": self.params.h,
        }

# ---------------------------------------------------------------------------
# built-in catalog
# ---------------------------------------------------------------------------

def builtin_scenario(name: str) -> Scenario:
    """Named scenarios reproducing the qualitative regimes of interest.

    The dynamical ones normalize to mean density 1 (total_mass = area);
    the static wage-profile diagnostic and the agent-convergence base keep
    unit mass.
    """
    if name == "megacity":
        # Two proto-cities inside one interaction basin: transiently >= 2
        # clusters, merged into a single city well before T = 20. A
        # near-uniform start instead freezes into ~10 cities whose spacing
        # exceeds the compact spillover reach, and no merge happens on any
        # practical horizon (that regime is what `metastability` probes).
        return Scenario(
            name="megacity",
            T=20.0,
            snapshot_times=(0.0, 1.0, 5.0, 10.0, 20.0),
            metrics_interval=0.5,
            total_mass=16.0,
            init=InitSpec(
                kind="epanechnikov",
                centers=((1.4, 2.0), (2.6, 2.0)),
                h_E=0.5,
                amplitude=0.12,
                seed=0,
            ),
        )
    if name == "bignoise":
        s = builtin_scenario("megacity")
        return replace(s, name="bignoise", params=s.params.with_(sigma=0.2))
    if name == "via-emilia":
        return Scenario(
            name="via-emilia",
            Lx=3.0, Ly=8.0, nx=96, ny=256,
            T=100.0,
            snapshot_times=(0.0, 10.0, 20.0, 100.0),
            metrics_interval=2.0,
            total_mass=24.0,
            init=InitSpec(kind="strip", rect=(1.0, 2.0, 1.0, 7.0)),
        )
    if name == "metastability":
        return Scenario(
            name="metastability",
            nx=96, ny=96,
            T=150.0,
            snapshot_times=(0.0, 5.0, 20.0, 75.0, 150.0),
            metrics_interval=1.0,
            total_mass=16.0,
            params=ParamSet(h=0.3),
            init=InitSpec(kind="uniform", amplitude=0.01, seed=0),
        )
    if name == "wage-profile":
        return Scenario(
            name="wage-profile",
            T=0.1,
            snapshot_times=(0.0,),
            metrics_interval=0.1,
            total_mass=1.0,
            init=InitSpec(kind="epanechnikov", center=(2.0, 2.0), h_E=0.4),
        )
    if name == "wage-profile-wide":
        s = builtin_scenario("wage-profile")
        return replace(s, name="wage-profile-wide", init=replace(s.init, h_E=1.2))
    if name == "convergence-base":
        return Scenario(
            name="convergence-base",
            nx=64, ny=64,
            T=2.0,
            snapshot_times=(0.0, 2.0),
            metrics_interval=0.5,
            total_mass=1.0,
            mode="both",
            n_agents=8000,
            init=InitSpec(kind="uniform", amplitude=0.01, seed=0),
        )
    raise ConfigurationError(
        f"unknown built-in scenario {name!r}; available: {', '.join(sorted(BUILTIN_NAMES))}"
    )


BUILTIN_NAMES = (
    "megacity", "bignoise", "via-emilia", "metastability",
    "wage-profile", "wage-profile-wide", "convergence-base",
)


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

_SCHEMA = {
    "scenario": ("name", "T", "mode", "n_agents", "snapshot_times", "metrics_interval"),
    "grid": ("Lx", "Ly", "nx", "ny"),
    "params": ("c_M", "sigma", "beta", "A0", "tau", "phi", "mu_A", "h", "n",
               "l_bar_reg", "lambda", "seed"),
    "init": ("kind", "amplitude", "seed", "smooth", "smooth_scale", "rect",
             "center", "centers", "h_E", "path", "total_mass"),
    "fields": ("G", "A_ES"),
    "numerics": ("safety", "dt_max", "cluster_threshold"),
}


def _convert(section: str, key: str, raw: str, kind):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return kind(raw)
    except ValueError as exc:
        raise ConfigurationError(f"[{section}] {key}: {exc}") from None


def _float_tuple(section: str, key: str, raw: str) -> tuple:
    try:
        return tuple(float(tok) for tok in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigurationError(f"[{section}] {key}: {exc}") from None


def parse_config(path) -> Scenario:
    """Parse an INI config into a validated Scenario.

    Unknown sections or keys are rejected with their path; an empty file
    yields the baseline scenario (all defaults).
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keys are case-sensitive (T vs t, Lx vs lx)
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from None

    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigurationError(
                f"{path}: unknown section [{section}]; expected {sorted(_SCHEMA)}"
            )
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ConfigurationError(
                    f"{path}: unknown key [{section}] {key}; expected one of {_SCHEMA[section]}"
                )

    def get(section, key, default, kind=float):
        if cp.has_option(section, key):
            return _convert(section, key, cp.get(section, key), kind)
        return default

    pdefaults = ParamSet()
    try:
        params = ParamSet(
            c_M=get("params", "c_M", pdefaults.c_M),
            sigma=get("params", "sigma", pdefaults.sigma),
            beta=get("params", "beta", pdefaults.beta),
            A0=get("params", "A0", pdefaults.A0),
            tau=get("params", "tau", pdefaults.tau),
            phi=get("params", "phi", pdefaults.phi),
            mu_A=get("params", "mu_A", pdefaults.mu_A),
            h=get("params", "h", pdefaults.h),
            n_rate=get("params", "n", pdefaults.n_rate),
            l_bar_reg=get("params", "l_bar_reg", pdefaults.l_bar_reg),
            lam=get("params", "lambda", pdefaults.lam),
            seed=get("params", "seed", pdefaults.seed, int),
        )
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: [params] {exc}") from None

    base = Scenario()
    rect = base.init.rect
    if cp.has_option("init", "rect"):
        rect = _float_tuple("init", "rect", cp.get("init", "rect"))
        if len(rect) != 4:
            raise ConfigurationError(f"{path}: [init] rect needs 4 numbers, got {rect}")
    center = base.init.center
    if cp.has_option("init", "center"):
        center = _float_tuple("init", "center", cp.get("init", "center"))
        if len(center) != 2:
            raise ConfigurationError(f"{path}: [init] center needs 2 numbers, got {center}")
    centers = None
    if cp.has_option("init", "centers"):
        centers = []
        for part in cp.get("init", "centers").split(";"):
            pair = _float_tuple("init", "centers", part)
            if len(pair) != 2:
                raise ConfigurationError(
                    f"{path}: [init] centers: each ;-separated entry needs 2 numbers"
                )
            centers.append(pair)
        centers = tuple(centers)
    try:
        init = InitSpec(
            kind=get("init", "kind", "uniform", str),
            amplitude=get("init", "amplitude", base.init.amplitude),
            seed=get("init", "seed", base.init.seed, int),
            smooth=get("init", "smooth", base.init.smooth, bool),
            smooth_scale=get("init", "smooth_scale", None),
            rect=rect,
            center=center,
            centers=centers,
            h_E=get("init", "h_E", base.init.h_E),
            path=get("init", "path", None, str),
        )
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: [init] {exc}") from None

    snapshot_times = base.snapshot_times
    if cp.has_option("scenario", "snapshot_times"):
        snapshot_times = _float_tuple("scenario", "snapshot_times",
                                      cp.get("scenario", "snapshot_times"))

    def field_spec(key):
        if not cp.has_option("fields", key):
            return None, None
        raw = cp.get("fields", key).strip()
        if raw.startswith("file:"):
            return None, raw[len("file:"):]
        return _convert("fields", key, raw, float), None

    G_value, G_path = field_spec("G")
    A_value, A_path = field_spec("A_ES")

    try:
        return Scenario(
            name=get("scenario", "name", base.name, str),
            Lx=get("grid", "Lx", base.Lx),
            Ly=get("grid", "Ly", base.Ly),
            nx=get("grid", "nx", base.nx, int),
            ny=get("grid", "ny", base.ny, int),
            params=params,
            init=init,
            G_value=base.G_value if G_value is None else G_value,
            G_path=G_path,
            A_ES_value=base.A_ES_value if A_value is None else A_value,
            A_ES_path=A_path,
            T=get("scenario", "T", base.T),
            snapshot_times=snapshot_times,
            metrics_interval=get("scenario", "metrics_interval", base.metrics_interval),
            mode=get("scenario", "mode", base.mode, str),
            n_agents=get("scenario", "n_agents", base.n_agents, int),
            total_mass=get("init", "total_mass", base.total_mass),
            safety=get("numerics", "safety", base.safety),
            dt_max=get("numerics", "dt_max", base.dt_max),
            cluster_rel_threshold=get("numerics", "cluster_threshold",
                                      base.cluster_rel_threshold),
        )
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class AgentRun:
    """Result of integrating the agent system over a scenario horizon."""

    population: microsim.Population
    densities: dict          # t -> mollified empirical density
    positions: dict          # t -> (N, 2) array copies
    meta: dict


def _agent_dt(fields_v: ScalarField, grid: Grid2D, c_M: float,
              safety: float, dt_max: float) -> float:
    from .grid import gradient

    gv = gradient(fields_v)
    vmax = max(float(np.abs(gv.vx).max()), float(np.abs(gv.vy).max())) / c_M
    bound = min(grid.dx, grid.dy) / vmax if vmax > 0 else np.inf
    return float(min(safety * bound, dt_max))


def run_agents(scenario: Scenario, sample_times=None) -> AgentRun:
    """Integrate the interacting agent system to the horizon.

    Fields are recomputed each step from the agents' own mollified
    empirical density (the self-consistent microsystem). Samples of the
    density and the raw positions are taken at the requested times, which
    default to the scenario snapshot times.
    """
    grid = scenario.make_grid()
    p = scenario.params
    l0 = scenario.initial_density(grid)
    G = scenario.G_field(grid)
    A_ES = scenario.A_ES_field(grid)
    plan = ConvolutionPlan(scenario.spillover_kernel(grid))

    n0 = scenario.n_agents
    from .kernels import mollifier_bandwidth_on_grid
    h_n, floored = mollifier_bandwidth_on_grid(n0, p.lam, grid)
    theta = ConvolutionPlan(discretize(KernelSpec("epanechnikov", h_n), grid))

    pop = microsim.make_population(l0, n0, seed=p.seed)
    times = sorted(set(float(t) for t in (sample_times if sample_times is not None
                                          else scenario.snapshot_times)))
    densities: dict = {}
    positions: dict = {}

    def sample(t: float):
        densities[t] = microsim.empirical_density(pop, grid, p.lam, mollifier=theta)
        positions[t] = pop.positions.copy()

    pending = [t for t in times if t > 0.0]
    if times and times[0] <= 0.0:
        sample(0.0)

    if isinstance(p.n_rate, ScalarField):
        has_births = bool(np.any(p.n_rate.values > 0))
    else:
        has_births = float(p.n_rate) > 0.0

    horizon = float(scenario.T)
    while pop.t < horizon - 1e-12:
        l_emp = microsim.empirical_density(pop, grid, p.lam, mollifier=theta)
        fields = compute_fields(l_emp, G, A_ES, p, plan)
        dt = _agent_dt(fields.v, grid, p.c_M, scenario.safety, scenario.dt_max)
        t_stop = pending[0] if pending else horizon
        dt = min(dt, t_stop - pop.t, horizon - pop.t)
        pop = microsim.step_agents(pop, fields, p, dt)
        if has_births:
            pop = microsim.spawn_births(pop, p.n_rate, dt)
        if pending and pop.t >= pending[0] - 1e-12:
            pop.t = pending.pop(0)
            sample(pop.t)

    return AgentRun(
        population=pop,
        densities=densities,
        positions=positions,
        meta={
            "n_agents": n0,
            "mollifier_h": h_n,
            "mollifier_floored": floored,
            "final_count": pop.count,
        },
    )


@dataclass(eq=False)
class RunOutputs:
    """What run_scenario produced, in memory and on disk."""

    scenario: Scenario
    trajectory: Optional[meanfield.Trajectory]
    agents: Optional[AgentRun]
    distances: list
    out_dir: Optional[Path]
    files: list


def _fmt_time(t: float) -> str:
    return ("%g" % t).replace(".", "p")


def run_scenario(scenario: Scenario, out_dir=None) -> RunOutputs:
    """Execute a scenario and (optionally) write its artifacts.

    pde mode writes density and wage snapshots plus the metrics series;
    agents mode writes position and empirical-density snapshots; both
    mode runs the two on the same initial condition and writes the
    density-distance time series.
    """
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    files: list = []
    trajectory = None
    agents = None
    distances: list = []

    grid = scenario.make_grid()
    p = scenario.params
    G = scenario.G_field(grid)
    A_ES = scenario.A_ES_field(grid)
    plan = ConvolutionPlan(scenario.spillover_kernel(grid))

    if scenario.mode in ("pde", "both"):
        trajectory = meanfield.run(scenario)
    if scenario.mode in ("agents", "both"):
        sample_times = sorted(set(
            list(scenario.snapshot_times)
            + ([t for (t, _) in trajectory.snapshots] if trajectory else [])
        ))
        agents = run_agents(scenario, sample_times=sample_times)

    if scenario.mode == "both":
        pde_at = {round(t, 9): f for (t, f) in trajectory.snapshots}
        for t, dens in sorted(agents.densities.items()):
            key = round(t, 9)
            if key in pde_at:
                l1, w1 = density_distance(dens, pde_at[key])
                distances.append({"t": t, "L1": l1, "sliced_W1": w1})

    if out is not None:
        meta = scenario.metadata()
        if trajectory is not None:
            meta.update(trajectory.meta)
        if agents is not None:
            meta.update({f"agents_{k}": v for k, v in agents.meta.items()})
        meta_path = out / "meta.txt"
        with open(meta_path, "w") as fh:
            for key in sorted(meta):
                fh.write(f"{key}={meta[key]}\n")
        files.append(meta_path)

        if trajectory is not None:
            mpath = out / "metrics.csv"
            snapshots.write_metrics_csv(mpath, trajectory.metrics)
            files.append(mpath)
            for t, fld in trajectory.snapshots:
                fpath = out / f"l_t{_fmt_time(t)}.snap"
                snapshots.write_snapshot(
                    fpath, fld, {"name": scenario.name, "seed": p.seed, "t": t}
                )
                files.append(fpath)
                wfield = compute_fields(fld, G, A_ES, p, plan).w
                wpath = out / f"w_t{_fmt_time(t)}.snap"
                snapshots.write_snapshot(
                    wpath, wfield, {"name": scenario.name, "seed": p.seed, "t": t}
                )
                files.append(wpath)

        if agents is not None:
            for t, pos in sorted(agents.positions.items()):
                ppath = out / f"agents_t{_fmt_time(t)}.snap"
                snapshots.write_snapshot(
                    ppath, pos,
                    {"name": scenario.name, "seed": p.seed, "t": t,
                     "Lx": grid.Lx, "Ly": grid.Ly},
                )
                files.append(ppath)

        if distances:
            dpath = out / "distances.csv"
            with open(dpath, "w") as fh:
                fh.write("t,L1,sliced_W1\n")
                for row in distances:
                    fh.write(f"{row['t']!r},{row['L1']!r},{row['sliced_W1']!r}\n")
            files.append(dpath)

    return RunOutputs(
        scenario=scenario,
        trajectory=trajectory,
        agents=agents,
        distances=distances,
        out_dir=out,
        files=files,
    )


def convergence_experiment(base: Scenario, N_list, seeds) -> dict:
    """Agent-to-continuum convergence sweep.

    Runs the PDE once on the base scenario, then for each N and seed
    integrates N agents to the horizon and measures the density distance
    at T. Reports per-run rows and the per-N medians; the medians are the
    quantity expected to decrease as N grows.
    """
    N_list = [int(n) for n in N_list]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ConfigurationError(f"N_list must be strictly increasing, got {N_list}")
    seeds = [int(s) for s in seeds]

    pde_scn = replace(base, mode="pde",
                      snapshot_times=tuple(sorted({0.0, float(base.T)})))
    trajectory = meanfield.run(pde_scn)
    l_final = trajectory.final.l

    rows = []
    for n in N_list:
        for seed in seeds:
            scn = replace(base, mode="agents", n_agents=n,
                          params=base.params.with_(seed=seed),
                          snapshot_times=(0.0, float(base.T)))
            result = run_agents(scn, sample_times=[float(base.T)])
            dens = result.densities[float(base.T)]
            l1, w1 = density_distance(dens, l_final)
            rows.append({"N": n, "seed": seed, "L1": l1, "sliced_W1": w1})

    medians = {
        n: float(np.median([r["L1"] for r in rows if r["N"] == n])) for n in N_list
    }
    return {"rows": rows, "median_L1": medians, "T": float(base.T)}


def write_convergence_report(path, report: dict) -> None:
    with open(path, "w") as fh:
        fh.write("N,seed,L1,sliced_W1\n")
        for row in report["rows"]:
            fh.write(f"{row['N']},{row['seed']},{row['L1']!r},{row['sliced_W1']!r}\n")
        fh.write("# medians\n")
        for n, med in report["median_L1"].items():
            fh.write(f"# N={n} median_L1={med!r}\n")
