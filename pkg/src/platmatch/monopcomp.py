"""Retail-platform application: CES demand, markup pricing, induced salience,
and screening of firms with partition information.

Firms differ in marginal cost; with CES preferences each firm prices at a
constant markup independent of the matching, so a firm's type v = c**(1-sigma)
summarizes it.  A firm set's quality is the weight-summed v over the set, the
price index and per-customer spending are powers of that quality, and the
customer's endogenous salience is psi * quality**kappa with kappa in (-1, 0).
The platform screens firms cell-by-cell under partition information and may
own cells, in which case their true values replace virtual values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import InputError, PreconditionError, ValidationError
from .mechanism import (
    DistributionSpec,
    Partition,
    cell_virtual_value,
    trapezoid_weights,
    virtual_value,
)
from .solver import iron_monotone


@dataclass(frozen=True)
class CesParams:
    """Preference parameters with sigma > 1, theta in (0, 1), sigma*(1-theta) > 1."""

    sigma: float
    theta: float
    wealth: float | None = None

    def __post_init__(self):
        errors = []
        if not self.sigma > 1:
            errors.append(f"sigma must be > 1, got {self.sigma}")
        if not 0 < self.theta < 1:
            errors.append(f"theta must lie in (0, 1), got {self.theta}")
        if not errors and not self.sigma * (1 - self.theta) > 1:
            errors.append(
                f"sigma*(1-theta) > 1 is required, got {self.sigma * (1 - self.theta)}"
            )
        if errors:
            raise ValidationError(errors)

    @cached_property
    def kappa(self):
        s, t = self.sigma, self.theta
        return (s * (1 - t) - 1) / ((1 - t) * (1 - s))

    @cached_property
    def psi(self):
        return (self.sigma / (self.sigma - 1)) ** (self.kappa * (1 - self.sigma))

    @cached_property
    def gamma(self):
        m = self.sigma / (self.sigma - 1)
        return m ** (1 - self.sigma) - m ** (-self.sigma)

    @cached_property
    def spend_exponent(self):
        return self.theta / (self.theta - 1)

    @cached_property
    def demand_exponent(self):
        return (self.sigma * (1 - self.theta) - 1) / (1 - self.theta)

    @cached_property
    def bundle_exponent(self):
        # exponent of set quality in per-customer spending and utility
        return self.theta / ((self.theta - 1) * (1 - self.sigma))

    @cached_property
    def bundle_constant(self):
        return ((1 - self.theta) / self.theta) * (self.sigma / (self.sigma - 1)) ** self.spend_exponent


@dataclass(frozen=True, eq=False)
class CesQuantities:
    prices: np.ndarray
    quantities: np.ndarray
    money: float
    price_index: float
    spending: float
    indirect_utility: float


def ces_demand(prices, ces, weights=None, wealth=None):
    """Demands, money holding, and indirect utility at a price vector.

    weights default to the counting measure over the listed firms.  Wealth
    must cover spending so money stays positive.
    """
    prices = np.asarray(prices, float)
    if prices.size == 0:
        raise InputError("need a nonempty firm set; the empty set spends nothing")
    if np.any(prices <= 0):
        raise InputError("prices must be > 0")
    w = np.ones_like(prices) if weights is None else np.asarray(weights, float)
    if w.shape != prices.shape or np.any(w <= 0):
        raise InputError("weights must be positive and aligned with prices")
    p_index = float(np.sum(w * prices ** (1 - ces.sigma)) ** (1 / (1 - ces.sigma)))
    spending = p_index ** ces.spend_exponent
    budget = ces.wealth if wealth is None else wealth
    if budget is None:
        budget = 2.0 * spending  # keep money holdings interior by default
    money = budget - spending
    if money < 0:
        raise InputError(
            f"wealth {budget} cannot cover spending {spending}; money demand would be negative"
        )
    q = prices ** (-ces.sigma) * p_index ** ces.demand_exponent
    utility = (1 - ces.theta) / ces.theta * p_index ** ces.spend_exponent + budget
    return CesQuantities(prices, q, money, p_index, spending, utility)


def markup_price(c, sigma):
    """Profit-maximizing price sigma/(sigma-1)*c, independent of the matching."""
    if not c > 0:
        raise InputError("marginal cost must be > 0")
    return sigma / (sigma - 1) * c


def salience_kernel(quality, ces, v_i=None):
    """Endogenous customer salience psi * quality**kappa, times type if given.

    Strictly decreasing in set quality since kappa < 0.
    """
    quality = np.asarray(quality, float)
    if np.any(quality <= 0):
        raise InputError("set quality must be > 0")
    out = ces.psi * quality ** ces.kappa
    if v_i is not None:
        out = np.asarray(v_i, float) * out
    return float(out) if out.ndim == 0 else out


def bundle_utility(quality, ces):
    """Customer surplus term from a set of total quality V (0 at the empty set)."""
    quality = np.asarray(quality, float)
    out = np.where(quality > 0, ces.bundle_constant * np.maximum(quality, 1e-300) ** ces.bundle_exponent, 0.0)
    return float(out) if out.ndim == 0 else out


def discretize_firms(dist, n):
    """Midpoint quadrature of a type distribution: values and masses."""
    edges = np.linspace(dist.a, dist.b, n + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    masses = dist.pdf(mids) * np.diff(edges)
    return mids, masses


# ---------------------------------------------------------------------------
# platform screening


@dataclass(frozen=True)
class RetailSpec:
    """Screening scenario over a discretized firm-type grid.

    individual_mode: "homogeneous" (one representative customer), "observed"
    (known heterogeneous types), or "private" (screened types).
    objective_mode: "welfare" adds customer surplus to firm-side revenue;
    "revenue" replaces it with virtual-value-weighted customer payments and
    requires private types.  owned_cells hold firms whose true values enter
    the firm-revenue term directly.
    """

    firm_values: tuple
    firm_weights: tuple
    firm_dist: DistributionSpec
    partition: Partition
    ces: CesParams
    individual_mode: str = "homogeneous"
    objective_mode: str = "welfare"
    individual_dist: DistributionSpec | None = None
    owned_cells: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "firm_values", tuple(float(v) for v in self.firm_values))
        object.__setattr__(self, "firm_weights", tuple(float(w) for w in self.firm_weights))
        object.__setattr__(self, "owned_cells", frozenset(int(c) for c in self.owned_cells))
        errors = []
        v = np.asarray(self.firm_values)
        w = np.asarray(self.firm_weights)
        if v.size == 0 or v.shape != w.shape:
            errors.append("firm grid and weights must be nonempty and aligned")
        else:
            if np.any(v <= 0):
                errors.append("firm values must be > 0 (they are c**(1-sigma) for costs c > 0)")
            if np.any(np.diff(v) <= 0):
                errors.append("firm values must be strictly increasing")
            if np.any(w <= 0):
                errors.append("firm weights must be > 0")
        if self.individual_mode not in ("homogeneous", "observed", "private"):
            errors.append(f"unknown individual mode {self.individual_mode!r}")
        if self.objective_mode not in ("welfare", "revenue"):
            errors.append(f"unknown objective mode {self.objective_mode!r}")
        if self.objective_mode == "revenue" and self.individual_mode != "private":
            errors.append("the two-sided revenue objective needs private individual types")
        if self.individual_mode != "homogeneous" and self.individual_dist is None:
            errors.append("heterogeneous modes need an individual type distribution")
        if not errors:
            for c in self.owned_cells:
                if not 0 <= c < self.partition.n_cells:
                    errors.append(f"owned cell {c} is not a partition cell")
        if errors:
            raise ValidationError(errors)

    @cached_property
    def firm_cells(self):
        return np.asarray(self.partition.cell_index(np.asarray(self.firm_values)))

    @cached_property
    def phi_eff(self):
        """Cell-wise virtual value, replaced by the true value in owned cells."""
        v = np.asarray(self.firm_values)
        phi = cell_virtual_value(self.firm_dist, self.partition, v)
        owned = np.isin(self.firm_cells, list(self.owned_cells))
        return np.where(owned, v, phi)

    @cached_property
    def ratio(self):
        return self.phi_eff / np.asarray(self.firm_values)

    @cached_property
    def ratio_order(self):
        """Firm indices sorted ascending by (ratio, v, index); sets are suffixes."""
        v = np.asarray(self.firm_values)
        return tuple(np.lexsort((np.arange(v.size), v, self.ratio)).tolist())

    @cached_property
    def ratio_monotone_per_cell(self):
        ok = True
        for c in range(self.partition.n_cells):
            mask = self.firm_cells == c
            if mask.sum() >= 2 and np.any(np.diff(self.ratio[mask]) < -1e-12):
                ok = False
        return ok

    @cached_property
    def individual_grid(self):
        if self.individual_mode == "homogeneous":
            return np.array([1.0])
        return self.individual_dist.grid

    @cached_property
    def individual_weights(self):
        if self.individual_mode == "homogeneous":
            return np.array([1.0])
        g = self.individual_dist.grid
        return trapezoid_weights(g) * self.individual_dist.pdf(g)


def _suffix_stats(spec):
    """Quality and effective-value totals of every suffix in the ratio order."""
    order = list(spec.ratio_order)
    v = np.asarray(spec.firm_values)[order]
    w = np.asarray(spec.firm_weights)[order]
    phi = spec.phi_eff[order]
    quality = np.concatenate([np.cumsum((v * w)[::-1])[::-1], [0.0]])
    phi_total = np.concatenate([np.cumsum((phi * w)[::-1])[::-1], [0.0]])
    return quality, phi_total


def _integrand_rows(spec):
    """Objective value per (individual type, suffix cutoff)."""
    quality, phi_total = _suffix_stats(spec)
    ces = spec.ces
    g = bundle_utility(quality, ces)
    with np.errstate(divide="ignore"):
        h = np.where(quality > 0, ces.psi * np.maximum(quality, 1e-300) ** ces.kappa, 0.0)
    firm_term = ces.gamma * h * phi_total  # per unit of customer salience weight
    types = spec.individual_grid
    if spec.individual_mode == "homogeneous":
        return (g + firm_term)[None, :]
    if spec.individual_mode == "observed":
        return types[:, None] * (g + firm_term)[None, :]
    if spec.objective_mode == "welfare":
        qi = spec.individual_dist.cdf(types)
        return g[None, :] * (1.0 - qi)[:, None] + types[:, None] * firm_term[None, :]
    phi_i = virtual_value(spec.individual_dist, types)
    return phi_i[:, None] * g[None, :] + types[:, None] * firm_term[None, :]


@dataclass(frozen=True, eq=False)
class RetailSolution:
    sets: np.ndarray               # (types, firms) bool, original firm order
    cutoffs: tuple                 # suffix start per type, in the ratio order
    objective: float
    pooled: bool
    pointwise_cutoffs: tuple
    pointwise_monotone: bool | None
    included_cells: tuple
    ratio_monotone_per_cell: bool


def solve_retail(spec):
    """Threshold sets in the effective-value-to-type ratio, per customer type.

    Private welfare mode pools: the unconstrained per-type optimum decreases
    in type, so the monotone solution gives everyone the aggregate optimum.
    Private revenue mode keeps pointwise solutions when qualities are already
    nondecreasing and irons them otherwise.
    """
    rows = _integrand_rows(spec)
    weights = spec.individual_weights
    quality, _ = _suffix_stats(spec)
    pointwise = np.argmax(rows, axis=1)
    pooled = False
    monotone = None
    if spec.individual_mode == "private" and spec.objective_mode == "welfare":
        pooled = True
        agg = weights @ rows
        common = int(np.argmax(agg))
        cutoffs = np.full(rows.shape[0], common)
        monotone = bool(np.all(np.diff(quality[pointwise]) <= 1e-12))  # qualities fall with type
    elif spec.individual_mode == "private" and spec.objective_mode == "revenue":
        cutoffs = pointwise.copy()
        q_point = quality[pointwise]
        monotone = bool(np.all(np.diff(q_point) >= -1e-12))
        if not monotone:
            ironed = iron_monotone(q_point, weights)
            cutoffs = _blockwise_argmax(rows, weights, ironed)
    else:
        cutoffs = pointwise.copy()
    sets = _cutoffs_to_sets(spec, cutoffs)
    objective = float(weights @ rows[np.arange(rows.shape[0]), cutoffs])
    return RetailSolution(
        sets,
        tuple(int(c) for c in cutoffs),
        objective,
        pooled,
        tuple(int(c) for c in pointwise),
        monotone,
        _included_cells(spec, sets),
        spec.ratio_monotone_per_cell,
    )


def _blockwise_argmax(rows, weights, ironed):
    """One aggregate argmax per pooled block of equal ironed targets."""
    cutoffs = np.empty(rows.shape[0], dtype=int)
    start = 0
    while start < rows.shape[0]:
        stop = start
        while stop < rows.shape[0] and ironed[stop] == ironed[start]:
            stop += 1
        agg = weights[start:stop] @ rows[start:stop]
        cutoffs[start:stop] = int(np.argmax(agg))
        start = stop
    return cutoffs


def _cutoffs_to_sets(spec, cutoffs):
    order = np.asarray(spec.ratio_order)
    n = order.size
    sets = np.zeros((len(cutoffs), n), dtype=bool)
    for row, c in enumerate(cutoffs):
        sets[row, order[c:]] = True
    return sets


def _included_cells(spec, sets):
    included = []
    for c in range(spec.partition.n_cells):
        mask = spec.firm_cells == c
        if mask.any() and bool(sets[:, mask].all()):
            included.append(c)
    return tuple(included)


def retail_objective(sets, spec):
    """Objective of arbitrary per-type firm sets (the subset-enumeration oracle path)."""
    sets = np.asarray(sets, dtype=bool)
    types = spec.individual_grid
    if sets.shape != (types.size, len(spec.firm_values)):
        raise InputError("sets must be (individual types, firms)")
    v = np.asarray(spec.firm_values)
    w = np.asarray(spec.firm_weights)
    quality = sets @ (v * w)
    phi_total = sets @ (spec.phi_eff * w)
    ces = spec.ces
    g = bundle_utility(quality, ces)
    with np.errstate(divide="ignore"):
        h = np.where(quality > 0, ces.psi * np.maximum(quality, 1e-300) ** ces.kappa, 0.0)
    firm_term = ces.gamma * h * phi_total
    if spec.individual_mode == "homogeneous":
        rows = g + firm_term
    elif spec.individual_mode == "observed":
        rows = types * (g + firm_term)
    elif spec.objective_mode == "welfare":
        rows = g * (1.0 - spec.individual_dist.cdf(types)) + types * firm_term
    else:
        rows = virtual_value(spec.individual_dist, types) * g + types * firm_term
    return float(spec.individual_weights @ rows)


def customer_welfare(spec, solution):
    """Per-type customer payoff: envelope rents under private types, direct
    surplus otherwise."""
    v = np.asarray(spec.firm_values)
    w = np.asarray(spec.firm_weights)
    quality = solution.sets @ (v * w)
    g = bundle_utility(quality, spec.ces)
    types = spec.individual_grid
    if spec.individual_mode == "private":
        steps = 0.5 * (g[1:] + g[:-1]) * np.diff(types)
        return np.concatenate([[0.0], np.cumsum(steps)])
    return types * g


# ---------------------------------------------------------------------------
# information and ownership counterfactuals


def acquire_cell(spec, cell, require_included=True):
    """Mark a partition cell as owned, so its true values replace virtual ones.

    The directional claims only cover cells that are included (all firms
    matched with every type) or excluded for everyone at the current
    solution, so by default acquisition of a partially included cell fails.
    """
    if not 0 <= cell < spec.partition.n_cells:
        raise InputError(f"no partition cell {cell}")
    if require_included:
        current = solve_retail(spec)
        if cell not in current.included_cells:
            raise PreconditionError(
                f"cell {cell} is not included at the current solution; no direction is asserted"
            )
    return replace(spec, owned_cells=spec.owned_cells | {cell})


def refine_partition(spec, cell, split):
    """Split one cell; owned-cell indices are remapped around the split."""
    new_partition = spec.partition.refine(cell, split)
    if new_partition is spec.partition:
        return spec
    owned = frozenset(c if c <= cell else c + 1 for c in spec.owned_cells)
    if cell in spec.owned_cells:
        owned = owned | {cell + 1}
    return replace(spec, partition=new_partition, owned_cells=owned)


@dataclass(frozen=True, eq=False)
class RetailComparisonReport:
    before: RetailSolution
    after: RetailSolution
    set_movement: str          # "shrink", "grow", "equal", "mixed"
    welfare_before: np.ndarray
    welfare_after: np.ndarray
    welfare_delta: np.ndarray


def counterfactual_compare(spec, transformed):
    """Solve both scenarios and report set movements and welfare deltas."""
    a = solve_retail(spec)
    b = solve_retail(transformed)
    if a.sets.shape != b.sets.shape:
        raise InputError("scenarios must share firm and type grids")
    shrink = bool(np.all(~b.sets | a.sets))
    grow = bool(np.all(~a.sets | b.sets))
    movement = "equal" if (shrink and grow) else "shrink" if shrink else "grow" if grow else "mixed"
    w_a = customer_welfare(spec, a)
    w_b = customer_welfare(transformed, b)
    return RetailComparisonReport(a, b, movement, w_a, w_b, w_b - w_a)
