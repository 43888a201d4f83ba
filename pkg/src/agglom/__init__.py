"""Spatial agglomeration dynamics on a periodic 2-D domain.

Two coupled views of the same economy: a stochastic N-agent simulator
(`microsim`) and its continuum aggregation-diffusion limit (`meanfield`),
sharing the economic field computations (`economy`), kernel machinery
(`kernels`) and discrete calculus (`grid`). `analysis` provides welfare,
stability and convergence diagnostics; `scenarios` and `cli` wrap it all
into reproducible runs.
"""

__version__ = "0.1.0"

from .errors import (
    AgglomError,
    ConfigurationError,
    DomainError,
    NumericError,
    ResolutionError,
    SolverInstabilityError,
)
from .grid import Grid2D, ScalarField, VectorField, make_grid
from .kernels import KernelSpec, convolve, discretize, mollifier_bandwidth
from .economy import EconomyFields, ParamSet, compute_fields
from .microsim import NashConfig1D, Population
from .meanfield import SolverState
from .analysis import MetricsRow
from .scenarios import InitSpec, Scenario, builtin_scenario, parse_config, run_scenario

__all__ = [
    "AgglomError",
    "ConfigurationError",
    "DomainError",
    "NumericError",
    "ResolutionError",
    "SolverInstabilityError",
    "Grid2D",
    "ScalarField",
    "VectorField",
    "make_grid",
    "KernelSpec",
    "convolve",
    "discretize",
    "mollifier_bandwidth",
    "EconomyFields",
    "ParamSet",
    "compute_fields",
    "NashConfig1D",
    "Population",
    "SolverState",
    "MetricsRow",
    "InitSpec",
    "Scenario",
    "builtin_scenario",
    "parse_config",
    "run_scenario",
    "__version__",
]
