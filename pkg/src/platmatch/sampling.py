"""Seeded random scenario generators for the property suites.

Vertical types draw uniform on [0.1, 2], masses draw uniform and normalize,
saliences stay at 1 unless a suite exercises horizontal differentiation.
Everything is driven by an explicit numpy Generator so suites are
reproducible from a single seed.
"""

from __future__ import annotations

import numpy as np

from .core import FirmType, IndividualType, MarketSpec
from .families import CompetitionKernel, PayoffFamily, ShapeFn
from .mechanism import DistributionSpec, Partition
from .monopcomp import CesParams, RetailSpec, discretize_firms
from .mvpd import MvpdSpec

V_LOW, V_HIGH = 0.1, 2.0

PAYOFFS = {
    "linear": lambda: PayoffFamily.linear(),
    "log": lambda: PayoffFamily.multiplicative(ShapeFn("log1p")),
    "sqrt": lambda: PayoffFamily.multiplicative(ShapeFn("power", rho=0.5)),
    "zero": lambda: PayoffFamily.zero(),
}


def payoff(tag):
    return PAYOFFS[tag]()


def random_kernel(rng):
    """Positive, strictly decreasing in match size."""
    kappa = float(rng.uniform(-1.5, -0.4))
    return CompetitionKernel.power(scale=1.0, eps=1.0, kappa=kappa)


def random_market(rng, n_firms=None, n_individuals=None, u_i="linear", u_f="linear", kernel=None):
    n_f = int(n_firms if n_firms is not None else rng.integers(2, 5))
    n_i = int(n_individuals if n_individuals is not None else rng.integers(2, 5))
    firm_v = np.sort(rng.uniform(V_LOW, V_HIGH, n_f))[::-1]
    firms = [FirmType(id=j + 1, v=float(firm_v[j]), sigma=1.0) for j in range(n_f)]
    ind_v = np.sort(rng.uniform(V_LOW, V_HIGH, n_i))
    masses = rng.uniform(0.5, 1.5, n_i)
    masses = masses / masses.sum()
    individuals = [
        IndividualType(id=i + 1, v=float(ind_v[i]), sigma=1.0, mass=float(masses[i]))
        for i in range(n_i)
    ]
    return MarketSpec(
        firms=firms,
        individuals=individuals,
        individual_payoff=payoff(u_i),
        firm_payoff=payoff(u_f),
        kernel=kernel if kernel is not None else random_kernel(rng),
    )


def random_monotone_allocation(rng, grid, x_max=3.0, max_slope=2.0):
    """Piecewise-linear nondecreasing allocation with bounded slope.

    Bounded slopes keep the trapezoid quadrature error of the revenue
    identity well under its 1e-8 tolerance on the suite grids.
    """
    knots = np.linspace(grid[0], grid[-1], int(rng.integers(3, 7)))
    slopes = rng.uniform(0.0, max_slope, knots.size - 1)
    levels = rng.uniform(0.0, 0.5) + np.concatenate([[0.0], np.cumsum(slopes * np.diff(knots))])
    levels = np.minimum(levels, x_max)
    return np.interp(grid, knots, levels)


def random_mvpd_spec(rng, n_channels=3, n_grid=41, affine_payoff=True, affine_bundle=True,
                     ensure_participation=True):
    """Seeded cable scenario meeting the merger lemmas' premises.

    ensure_participation draws a viewer support with a positive virtual value
    at the bottom, so nobody is excluded at the optimum.
    """
    a = float(rng.uniform(0.8, 1.2))
    width = float(rng.uniform(0.3, 0.9 * a))  # 2a > b keeps phi(a) > 0
    if not ensure_participation:
        width = float(rng.uniform(0.5, 1.5))
    dist = DistributionSpec.uniform(a, a + width, n_grid=n_grid)
    v = np.sort(rng.uniform(0.5, 2.0, n_channels))[::-1]
    channels = [FirmType(id=j + 1, v=float(v[j]), sigma=1.0) for j in range(n_channels)]
    channel_payoff = payoff("linear" if affine_payoff else "log")
    slope = float(rng.uniform(0.5, 1.5))
    bundle = ShapeFn.linear(slope, 0.0) if affine_bundle else ShapeFn("power", rho=0.5)
    kernel = CompetitionKernel.power(scale=1.0, eps=float(rng.uniform(0.2, 1.0)),
                                     kappa=float(rng.uniform(-1.0, -0.3)))
    return MvpdSpec(
        channels=channels,
        channel_payoff=channel_payoff,
        bundle_value=bundle,
        viewer_dist=dist,
        beta=float(rng.uniform(0.2, 0.8)),
        kernel=kernel,
    )


def random_retail_spec(rng, n_firms=12, n_cells=2, individual_mode="homogeneous",
                       objective_mode="welfare", n_individual_grid=21):
    """Seeded screening scenario with uniform firm types and per-cell regular ratios."""
    lo = float(rng.uniform(0.1, 0.4))
    hi = lo + float(rng.uniform(0.6, 1.2))
    firm_dist = DistributionSpec.uniform(lo, hi, n_grid=101)
    values, weights = discretize_firms(firm_dist, n_firms)
    edges = np.linspace(lo, hi, n_cells + 1)
    ces = CesParams(sigma=float(rng.uniform(2.2, 4.0)), theta=float(rng.uniform(0.15, 0.5)))
    if ces.sigma * (1 - ces.theta) <= 1:
        ces = CesParams(sigma=3.0, theta=0.5)
    individual_dist = None
    if individual_mode != "homogeneous":
        ia = float(rng.uniform(0.8, 1.2))
        individual_dist = DistributionSpec.uniform(ia, ia + float(rng.uniform(0.4, 0.8)),
                                                   n_grid=n_individual_grid)
    return RetailSpec(
        firm_values=tuple(values),
        firm_weights=tuple(weights),
        firm_dist=firm_dist,
        partition=Partition(tuple(edges)),
        ces=ces,
        individual_mode=individual_mode,
        objective_mode=objective_mode,
        individual_dist=individual_dist,
    )
