"""Private-information layer: distributions, virtual values, envelope payoffs,
payments, and incentive-compatibility audits.

All integrals are trapezoid sums on the distribution's grid; grid resolution
is scenario data.  Payoff normalization U(v_low, 0) = 0 is enforced at the
mechanism entry points only.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import stats

from .errors import IcError, IdentityError, InputError, PreconditionError, ValidationError

SUPPORT_TOL = 1e-12
REVENUE_IDENTITY_TOL = 1e-8
IC_TOL = 1e-9
_AUDIT_POINTS = 1024


@dataclass(frozen=True)
class DistributionSpec:
    """CDF/density pair on an interval, the source of virtual values.

    kinds: "uniform" on [a, b]; "truncnorm" with location mu and scale s
    truncated to [a, b]; "table" with explicit grid/cdf/pdf arrays.  For the
    analytic kinds the evaluation grid is n_grid equally spaced points.
    """

    kind: str
    a: float = 0.0
    b: float = 1.0
    mu: float = 0.0
    s: float = 1.0
    table_grid: tuple = ()
    table_cdf: tuple = ()
    table_pdf: tuple = ()
    n_grid: int = 1001

    def __post_init__(self):
        errors = []
        if self.kind not in ("uniform", "truncnorm", "table"):
            errors.append(f"unknown distribution kind {self.kind!r}")
        elif self.kind == "table":
            g = np.asarray(self.table_grid, float)
            c = np.asarray(self.table_cdf, float)
            p = np.asarray(self.table_pdf, float)
            if g.size < 2 or g.size != c.size or g.size != p.size:
                errors.append("tabulated distribution needs aligned grid/cdf/pdf with >= 2 points")
            else:
                if np.any(np.diff(g) <= 0):
                    errors.append("tabulated grid must be strictly increasing")
                if np.any(np.diff(c) < 0) or abs(c[0]) > 1e-9 or abs(c[-1] - 1) > 1e-9:
                    errors.append("tabulated cdf must go from 0 to 1 and be nondecreasing")
                if np.any(p <= 0):
                    errors.append("tabulated density must be > 0 on the support")
                approx = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(g))])
                if np.max(np.abs(approx - c)) > 1e-6:
                    errors.append("tabulated cdf is inconsistent with the density (trapezoid check)")
            object.__setattr__(self, "a", float(self.table_grid[0]) if self.table_grid else 0.0)
            object.__setattr__(self, "b", float(self.table_grid[-1]) if self.table_grid else 1.0)
        else:
            if not self.b > self.a:
                errors.append("distribution support needs b > a")
            if self.kind == "truncnorm" and not self.s > 0:
                errors.append("truncnorm needs scale s > 0")
            if self.n_grid < 2:
                errors.append("n_grid must be >= 2")
        if errors:
            raise ValidationError(errors)

    @cached_property
    def grid(self):
        if self.kind == "table":
            return np.asarray(self.table_grid, float)
        return np.linspace(self.a, self.b, self.n_grid)

    @cached_property
    def _frozen(self):
        lo = (self.a - self.mu) / self.s
        hi = (self.b - self.mu) / self.s
        return stats.truncnorm(lo, hi, loc=self.mu, scale=self.s)

    def cdf(self, v):
        v = np.asarray(v, float)
        if self.kind == "uniform":
            return np.clip((v - self.a) / (self.b - self.a), 0.0, 1.0)
        if self.kind == "truncnorm":
            return self._frozen.cdf(v)
        return np.interp(v, self.table_grid, self.table_cdf)

    def pdf(self, v):
        v = np.asarray(v, float)
        if self.kind == "uniform":
            return np.full(v.shape, 1.0 / (self.b - self.a))
        if self.kind == "truncnorm":
            return self._frozen.pdf(v)
        return np.interp(v, self.table_grid, self.table_pdf)

    @staticmethod
    def uniform(a, b, n_grid=1001):
        return DistributionSpec("uniform", a=float(a), b=float(b), n_grid=n_grid)

    @staticmethod
    def truncated_normal(mu, s, a, b, n_grid=1001):
        return DistributionSpec("truncnorm", a=float(a), b=float(b), mu=float(mu), s=float(s), n_grid=n_grid)


def trapezoid_weights(grid):
    """Weights w with sum(w*f) equal to the trapezoid integral of f on grid."""
    grid = np.asarray(grid, float)
    w = np.zeros_like(grid)
    d = np.diff(grid)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def _check_support(dist, v):
    v = np.asarray(v, float)
    if np.any(v < dist.a - SUPPORT_TOL) or np.any(v > dist.b + SUPPORT_TOL):
        raise InputError(f"value outside the distribution support [{dist.a}, {dist.b}]")


def virtual_value(dist, v):
    """Type minus the inverse-hazard information rent, v - (1 - Q(v))/q(v)."""
    _check_support(dist, v)
    v = np.asarray(v, float)
    out = v - (1.0 - dist.cdf(v)) / dist.pdf(v)
    return float(out) if out.ndim == 0 else out


def is_regular(dist, tol=1e-9):
    """Whether the virtual value is nondecreasing on the distribution grid."""
    phi = virtual_value(dist, dist.grid)
    return bool(np.all(np.diff(phi) >= -tol))


@dataclass(frozen=True)
class Partition:
    """Ordered cells [e0, e1), [e1, e2), ..., last cell closed, covering [a, b]."""

    edges: tuple

    def __post_init__(self):
        e = np.asarray(self.edges, float)
        errors = []
        if e.size < 2:
            errors.append("partition needs at least two edges")
        elif np.any(np.diff(e) <= 0):
            errors.append("partition edges must be strictly increasing")
        if errors:
            raise ValidationError(errors)

    @property
    def n_cells(self):
        return len(self.edges) - 1

    def cell_index(self, v):
        v = np.asarray(v, float)
        e = np.asarray(self.edges, float)
        if np.any(v < e[0] - SUPPORT_TOL) or np.any(v > e[-1] + SUPPORT_TOL):
            raise InputError("value outside the partitioned range")
        idx = np.clip(np.searchsorted(e, v, side="right") - 1, 0, self.n_cells - 1)
        return int(idx) if idx.ndim == 0 else idx

    def cell_top(self, v):
        e = np.asarray(self.edges, float)
        out = e[np.asarray(self.cell_index(v)) + 1]
        return float(out) if out.ndim == 0 else out

    def refine(self, cell, split):
        """Split one cell at an interior point; splitting at the top is a no-op."""
        lo, hi = self.edges[cell], self.edges[cell + 1]
        if abs(split - hi) <= SUPPORT_TOL:
            return self
        if not (lo < split < hi):
            raise InputError(f"split {split} lies outside cell [{lo}, {hi})")
        edges = list(self.edges)
        edges.insert(cell + 1, float(split))
        return Partition(tuple(edges))

    @staticmethod
    def trivial(a, b):
        return Partition((float(a), float(b)))


def cell_virtual_value(dist, partition, v):
    """Virtual value with the information rent truncated at the cell top.

    With coarser information the platform only fears deviations within the
    cell, so the rent term integrates to the cell's upper bound.
    """
    _check_support(dist, v)
    v = np.asarray(v, float)
    top = partition.cell_top(v)
    out = v - (dist.cdf(top) - dist.cdf(v)) / dist.pdf(v)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# envelope payoffs and payments


def envelope_payoffs(allocation, u_i, dist, v_low_payoff=0.0):
    """V on the grid: v_low_payoff plus the running integral of U_1(t, x(t))."""
    grid = dist.grid
    allocation = np.asarray(allocation, float)
    if allocation.shape != grid.shape:
        raise InputError("allocation must be defined on the distribution grid")
    marginal = u_i.dv(grid, allocation)
    steps = 0.5 * (marginal[1:] + marginal[:-1]) * np.diff(grid)
    return v_low_payoff + np.concatenate([[0.0], np.cumsum(steps)])


@dataclass(frozen=True, eq=False)
class IcVerdict:
    passed: bool
    witness: tuple | None = None  # (true type, profitable report, gain)

    def __bool__(self):
        return self.passed


@dataclass(frozen=True, eq=False)
class MechanismReport:
    allocation: np.ndarray
    envelope: np.ndarray
    payments: np.ndarray
    total_revenue: float
    direct_revenue: float
    ic: IcVerdict


def payments_and_revenue(allocation, u_i, dist):
    """Envelope payments and the two revenue computations.

    total_revenue is the virtual-surplus integral; the direct payment sum
    must agree with it within 1e-8 (integration by parts), otherwise the
    grid is too coarse for this allocation and an IdentityError is raised.
    """
    grid = dist.grid
    allocation = np.asarray(allocation, float)
    if allocation.shape != grid.shape:
        raise InputError("allocation must be defined on the distribution grid")
    if abs(float(u_i(grid[0], 0.0))) > 1e-9:
        raise PreconditionError("payoff of the lowest type at the empty set must be normalized to 0")
    if np.any(np.diff(allocation) < -1e-12):
        k = int(np.flatnonzero(np.diff(allocation) < -1e-12)[0])
        raise IcError(f"allocation decreases between grid points {k} and {k + 1}")

    # revenue maximization leaves the lowest type no rent above the outside option
    envelope = envelope_payoffs(allocation, u_i, dist, v_low_payoff=0.0)
    payments = np.asarray(u_i(grid, allocation), float) - envelope

    w = trapezoid_weights(grid)
    q = dist.pdf(grid)
    cdf = dist.cdf(grid)
    direct = float(np.sum(w * payments * q))
    virtual = float(
        np.sum(w * (np.asarray(u_i(grid, allocation), float) * q - (1.0 - cdf) * u_i.dv(grid, allocation)))
    )
    if abs(direct - virtual) > REVENUE_IDENTITY_TOL:
        raise IdentityError(
            f"payment sum {direct!r} and virtual-surplus integral {virtual!r} disagree beyond 1e-8"
        )
    stride = max(1, (grid.size - 1) // _AUDIT_POINTS)
    idx = np.arange(0, grid.size, stride)
    ic = audit_ic(allocation[idx], payments[idx], u_i, grid[idx])
    return MechanismReport(allocation, envelope, payments, virtual, direct, ic)


def audit_ic(allocation, payments, u_i, grid, tol=IC_TOL):
    """Direct pairwise check: no type prefers another type's bundle and payment."""
    grid = np.asarray(grid, float)
    allocation = np.asarray(allocation, float)
    payments = np.asarray(payments, float)
    own = np.asarray(u_i(grid, allocation), float) - payments
    block = max(1, (1 << 22) // max(grid.size, 1))
    for start in range(0, grid.size, block):
        stop = min(start + block, grid.size)
        dev = np.asarray(u_i(grid[start:stop, None], allocation[None, :]), float) - payments[None, :]
        gain = dev - own[start:stop, None]
        if np.any(gain > tol):
            r, c = np.argwhere(gain > tol)[0]
            return IcVerdict(False, (float(grid[start + r]), float(grid[c]), float(gain[r, c])))
    return IcVerdict(True)


# ---------------------------------------------------------------------------
# preconditions for envelope-based welfare comparisons


@dataclass(frozen=True)
class WelfarePreconditions:
    """Both readings of the participation requirement, reported without choosing.

    participation_all: every individual type is matched with at least one firm
    (the top firm's threshold reaches the bottom of the grid).
    top_threshold_at_top: the top firm's lowest matched type is the top of the
    grid (the literal cutoff condition).
    The payoff monotonicity flags cover the top firm's payoff and the lowest
    type's payoff on the scenario ranges.
    """

    participation_all: bool
    top_threshold_at_top: bool
    firm_payoff_increasing: bool
    individual_payoff_increasing: bool

    @property
    def satisfied(self):
        return self.participation_all and self.firm_payoff_increasing and self.individual_payoff_increasing


def welfare_envelope_preconditions(market, matching):
    if matching.threshold_repr is None:
        raise PreconditionError("matching must be threshold-representable")
    top = market.firm_order_asc[-1]
    row = matching.incidence[top, :]
    participation = bool(matching.incidence.any(axis=0).all())
    matched = np.flatnonzero(row)
    top_at_top = bool(matched.size == 1 and matched[0] == len(market.individuals) - 1)

    qgrid = market.quality_grid
    fam = market.firm_family(top)
    f_incr = bool(np.all(np.diff(fam(market.firm_v[top], qgrid)) >= -1e-12))
    sizes = market.achievable_sizes
    i_incr = bool(np.all(np.diff(market.individual_payoff(market.ind_v[0], sizes)) >= -1e-12))
    return WelfarePreconditions(participation, top_at_top, f_incr, i_incr)
