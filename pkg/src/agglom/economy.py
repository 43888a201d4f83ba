"""Economic fields derived from a labour density.

Given density l, land potential G and exogenous amenities A_ES, this
module produces the full set of local variables:

    A_l  = G * (K_h * l)            local technology (spillover smoothing)
    y    = A_l * l^beta             local income
    w    = A_l * reg(l)^ (beta-1)   wage, with a bounded continuation of
                                    l^(beta-1) below l_bar_reg
    A_EN = A0 * [(tau y)^phi - mu_A l]   endogenous amenities net of congestion
    v    = w + A_EN + A_ES          systematic utility (the drift potential)
    u    = v - sigma^2/(2 c_M) log l    total utility (reporting only)

The wage exponent beta - 1 is negative, so raw wages blow up in empty
cells; `regularized_power` continues l^(beta-1) linearly below the
threshold, keeping it positive, nonincreasing and bounded by twice the
threshold value.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import ScalarField, VectorField, gradient, require_same_grid
from .kernels import ConvolutionPlan

LOG_DENSITY_FLOOR = 1e-10


@dataclass(frozen=True)
class ParamSet:
    """Model constants (baseline values in comments) plus numerical knobs."""

    c_M: float = 100.0      # movement cost
    sigma: float = 0.05     # noise scale of idiosyncratic preferences
    beta: float = 0.6       # production exponent
    A0: float = 6.0         # amenity scale
    tau: float = 0.2        # income share financing amenities
    phi: float = 0.5        # amenity production exponent
    mu_A: float = 0.2       # congestion rate
    h: float = 0.4          # spillover kernel bandwidth
    n_rate: float = 0.0     # workforce growth rate (uniform; fields via harness)
    l_bar_reg: float = 0.1  # wage regularization threshold
    lam: float = 0.2        # mollifier exponent for the agent simulator
    seed: int = 0

    def __post_init__(self):
        checks = [
            (self.c_M > 0, f"c_M must be > 0, got {self.c_M}"),
            (self.sigma >= 0, f"sigma must be >= 0, got {self.sigma}"),
            (0 < self.beta <= 1, f"beta must be in (0, 1], got {self.beta}"),
            (0 < self.phi < 1, f"phi must be in (0, 1), got {self.phi}"),
            (0 < self.tau < 1, f"tau must be in (0, 1), got {self.tau}"),
            (self.mu_A >= 0, f"mu_A must be >= 0, got {self.mu_A}"),
            (self.h > 0, f"h must be > 0, got {self.h}"),
            (self.l_bar_reg > 0, f"l_bar_reg must be > 0, got {self.l_bar_reg}"),
            (0 < self.lam < 0.25, f"lam must be in (0, 0.25), got {self.lam}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigurationError(msg)

    def with_(self, **kwargs) -> "ParamSet":
        return replace(self, **kwargs)

    @property
    def entropy_weight(self) -> float:
        """sigma^2 / (2 c_M): weight of log l in utility and social utility."""
        return self.sigma**2 / (2.0 * self.c_M)

    @property
    def diffusivity(self) -> float:
        """sigma^2 / (2 c_M^2): diffusion coefficient of the continuum limit."""
        return self.sigma**2 / (2.0 * self.c_M**2)


@dataclass(eq=False)
class EconomyFields:
    A_l: ScalarField
    y: ScalarField
    w: ScalarField
    A_EN: ScalarField
    v: ScalarField
    u: ScalarField


def regularized_power(l, beta: float, l_bar: float):
    """Bounded continuation of l^(beta-1).

    Returns l^(beta-1) for l > l_bar and the linear extension
    l_bar^(beta-1) * (2 - l/l_bar) on [0, l_bar]: continuous at l_bar,
    positive, nonincreasing, and capped at 2 l_bar^(beta-1) at l = 0.
    Accepts scalars or arrays; negative l raises DomainError.
    """
    arr = np.asarray(l, dtype=float)
    if np.any(arr < 0):
        raise DomainError("regularized_power needs l >= 0")
    if not l_bar > 0:
        raise DomainError(f"regularization threshold must be > 0, got {l_bar}")
    cap = l_bar ** (beta - 1.0)
    out = np.where(
        arr > l_bar,
        np.power(np.maximum(arr, l_bar), beta - 1.0),
        cap * (2.0 - arr / l_bar),
    )
    return float(out) if out.ndim == 0 else out


def compute_fields(
    l: ScalarField,
    G: ScalarField,
    A_ES: ScalarField,
    p: ParamSet,
    kernel: Union[ScalarField, ConvolutionPlan],
) -> EconomyFields:
    """Evaluate all economic fields for a density snapshot.

    `kernel` is the discretized spillover kernel, either as a field or as
    a prebuilt ConvolutionPlan (the solver reuses one plan per run).
    """
    require_same_grid(l, G)
    require_same_grid(l, A_ES)
    lv = l.values
    if np.any(lv < 0):
        bad = np.argwhere(lv < 0)
        i, j = (int(v) for v in bad[0])
        raise DomainError(f"negative density at cell ({i}, {j}): {lv[i, j]}")

    plan = kernel if isinstance(kernel, ConvolutionPlan) else ConvolutionPlan(kernel)
    if plan.grid != l.grid:
        raise ConfigurationError("kernel grid does not match density grid")

    smoothed = plan.apply(lv)
    A_l = G.values * smoothed
    y = A_l * np.power(lv, p.beta)
    w = A_l * regularized_power(lv, p.beta, p.l_bar_reg)
    A_EN = p.A0 * (np.power(p.tau * y, p.phi) - p.mu_A * lv)
    v = w + A_EN + A_ES.values
    u = v - p.entropy_weight * np.log(np.maximum(lv, LOG_DENSITY_FLOOR))

    g = l.grid
    return EconomyFields(
        A_l=ScalarField(g, A_l),
        y=ScalarField(g, y),
        w=ScalarField(g, w),
        A_EN=ScalarField(g, A_EN),
        v=ScalarField(g, v),
        u=ScalarField(g, u),
    )


def amenity_threshold(A_l: float, p: ParamSet) -> float:
    """Density above which endogenous amenities oppose agglomeration.

    Closed form: [phi beta tau^phi A_l^phi / mu_A]^(1/(1 - phi beta)),
    the argmax of l -> (tau A_l l^beta)^phi - mu_A l. Returns +inf when
    mu_A == 0 (congestion absent, amenities never push back).
    """
    if not A_l > 0:
        raise DomainError(f"amenity threshold needs A_l > 0, got {A_l}")
    if p.mu_A == 0.0:
        return float("inf")
    expo = 1.0 / (1.0 - p.phi * p.beta)
    return float((p.phi * p.beta * p.tau**p.phi * A_l**p.phi / p.mu_A) ** expo)


def field_gradients(fields: EconomyFields) -> dict[str, VectorField]:
    """Centered gradients of every derived field, keyed by name."""
    return {
        "A_l": gradient(fields.A_l),
        "y": gradient(fields.y),
        "w": gradient(fields.w),
        "A_EN": gradient(fields.A_EN),
        "v": gradient(fields.v),
    }
