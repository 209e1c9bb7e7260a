"""Domain types and the platform objective.

A market has finitely many firms (each counted with mass 1) and a grid of
individual types with masses that discretize a continuum side.  A matching
is a single firm-by-individual incidence matrix, so reciprocity holds by
construction.  An individual's matched set enters payoffs through its
salience-weighted size; a firm's matched set enters through the
kernel-weighted mass of its individuals, which is how competition between
firms over the same individuals is encoded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InputError, InvariantViolation, NumericError, ValidationError
from .families import CompetitionKernel, PayoffFamily

MASS_TOL = 1e-9
SUPERMOD_TOL = 1e-12


@dataclass(frozen=True)
class FirmType:
    id: int
    v: float
    sigma: float = 1.0


@dataclass(frozen=True)
class IndividualType:
    id: int
    v: float
    sigma: float = 1.0
    mass: float = 1.0


@dataclass(frozen=True)
class MarketSpec:
    firms: tuple
    individuals: tuple
    individual_payoff: PayoffFamily
    firm_payoff: PayoffFamily
    kernel: CompetitionKernel
    firm_payoff_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "firms", tuple(self.firms))
        object.__setattr__(self, "individuals", tuple(self.individuals))
        errors = validate_market(self)
        if errors:
            raise ValidationError(errors)

    # -- cached views -------------------------------------------------

    @cached_property
    def firm_v(self):
        return np.array([f.v for f in self.firms], dtype=float)

    @cached_property
    def firm_sigma(self):
        return np.array([f.sigma for f in self.firms], dtype=float)

    @cached_property
    def ind_v(self):
        return np.array([i.v for i in self.individuals], dtype=float)

    @cached_property
    def ind_sigma(self):
        return np.array([i.sigma for i in self.individuals], dtype=float)

    @cached_property
    def ind_mass(self):
        return np.array([i.mass for i in self.individuals], dtype=float)

    @cached_property
    def firm_index(self):
        return {f.id: k for k, f in enumerate(self.firms)}

    @cached_property
    def individual_index(self):
        return {i.id: k for k, i in enumerate(self.individuals)}

    @cached_property
    def firm_order_asc(self):
        """Firm indices sorted ascending by (v, id)."""
        keys = [(f.v, f.id) for f in self.firms]
        return tuple(sorted(range(len(self.firms)), key=lambda k: keys[k]))

    @cached_property
    def valid_cutoffs(self):
        """Cutoff positions into the ascending firm order that do not split ties.

        Cutoff c matches the suffix order[c:], so 0 matches everyone and
        n_firms matches nobody.
        """
        order = self.firm_order_asc
        v = self.firm_v[list(order)]
        cuts = [0]
        for c in range(1, len(order)):
            if v[c - 1] < v[c]:
                cuts.append(c)
        cuts.append(len(order))
        return tuple(cuts)

    def firm_family(self, index):
        fid = self.firms[index].id
        return self.firm_payoff_overrides.get(fid, self.firm_payoff)

    @cached_property
    def firm_family_groups(self):
        """Firm indices grouped by their effective payoff family."""
        groups = {}
        for k in range(len(self.firms)):
            groups.setdefault(id(self.firm_family(k)), (self.firm_family(k), []))[1].append(k)
        return tuple((fam, tuple(idx)) for fam, idx in groups.values())

    @cached_property
    def achievable_sizes(self):
        """Sorted unique salience-weighted sizes an individual's set can take."""
        n = len(self.firms)
        if n <= 12:
            masks = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(float)
            sums = masks @ self.firm_sigma
        else:
            desc = np.sort(self.firm_sigma)[::-1]
            sums = np.concatenate([[0.0], np.cumsum(desc)])
            sums = np.concatenate([sums, np.linspace(0.0, sums[-1], 33)])
        return np.unique(np.round(sums, 12))

    @cached_property
    def quality_grid(self):
        """Grid of achievable firm match qualities, [0, max kernel value]."""
        sizes = self.achievable_sizes
        sizes = sizes[sizes > 0]
        if sizes.size == 0:
            return np.linspace(0.0, 1.0, 9)
        h = self.kernel(
            sizes[:, None, None], self.ind_sigma[None, :, None], self.firm_sigma[None, None, :]
        )
        top = float(np.max(h))
        if not np.isfinite(top) or top <= 0:
            top = 1.0
        return np.linspace(0.0, top, 17)


def validate_market(market):
    """Collect every invariant violation; empty list means the market is valid."""
    errors = []
    firms = market.firms
    inds = market.individuals
    if not firms:
        errors.append("market needs at least one firm")
    if not inds:
        errors.append("market needs at least one individual type")
    fids = [f.id for f in firms]
    if len(set(fids)) != len(fids):
        errors.append("firm ids must be unique")
    iids = [i.id for i in inds]
    if len(set(iids)) != len(iids):
        errors.append("individual ids must be unique")
    for f in firms:
        if f.sigma < 0:
            errors.append(f"firm {f.id}: salience must be >= 0, got {f.sigma}")
    for i in inds:
        if i.sigma < 0:
            errors.append(f"individual {i.id}: salience must be >= 0, got {i.sigma}")
        if not i.mass > 0:
            errors.append(f"individual {i.id}: mass must be > 0, got {i.mass}")
    if inds:
        total = sum(i.mass for i in inds)
        if abs(total - 1.0) > MASS_TOL:
            errors.append(f"individual masses must sum to 1, got {total!r}")
        vs = [i.v for i in inds]
        if any(b < a for a, b in zip(vs, vs[1:])):
            errors.append("individual grid must be sorted ascending in v")
    for fid in market.firm_payoff_overrides:
        if fid not in set(fids):
            errors.append(f"payoff override for unknown firm id {fid}")
    if errors:
        return errors

    # kernel and payoffs must be finite and the kernel non-negative on the
    # achievable range (empty sets never reach the kernel)
    sizes = market.achievable_sizes
    pos = sizes[sizes > 0]
    if pos.size:
        h = market.kernel(
            pos[:, None, None], market.ind_sigma[None, :, None], market.firm_sigma[None, None, :]
        )
        if not np.all(np.isfinite(h)):
            errors.append("kernel evaluates non-finite on the achievable size range")
        elif float(np.min(h)) < 0:
            errors.append("kernel must be >= 0 on the achievable size range")
    ui = market.individual_payoff(market.ind_v[:, None], sizes[None, :])
    if not np.all(np.isfinite(ui)):
        errors.append("individual payoff evaluates non-finite on the achievable size range")
    qgrid = market.quality_grid if not errors else np.linspace(0, 1, 3)
    for fam, idx in market.firm_family_groups:
        uf = fam(market.firm_v[list(idx)][:, None], qgrid[None, :])
        if not np.all(np.isfinite(uf)):
            errors.append("firm payoff evaluates non-finite on the achievable quality range")
            break
    return errors


# ---------------------------------------------------------------------------
# matchings


@dataclass(frozen=True, eq=False)
class Matching:
    """Boolean incidence, rows = market.firms order, cols = market.individuals order.

    threshold_repr holds one cutoff per individual into the ascending firm
    order (0 = matched with every firm, n = matched with none) whenever each
    individual's set is exactly the firms above a type cutoff, ties included.
    """

    incidence: np.ndarray
    threshold_repr: tuple | None = None
    representable: bool = False

    @staticmethod
    def from_incidence(market, incidence):
        inc = np.asarray(incidence, dtype=bool)
        if inc.shape != (len(market.firms), len(market.individuals)):
            raise InputError(
                f"incidence shape {inc.shape} does not match market "
                f"({len(market.firms)} firms x {len(market.individuals)} individuals)"
            )
        cutoffs = _threshold_classify(market, inc)
        return Matching(inc, cutoffs, cutoffs is not None)

    @staticmethod
    def from_cutoffs(market, cutoffs):
        cutoffs = tuple(int(c) for c in cutoffs)
        if len(cutoffs) != len(market.individuals):
            raise InputError("need one cutoff per individual")
        valid = set(market.valid_cutoffs)
        for c in cutoffs:
            if c not in valid:
                raise InputError(f"cutoff {c} is not a tie-respecting position")
        pos = np.empty(len(market.firms), dtype=int)
        pos[list(market.firm_order_asc)] = np.arange(len(market.firms))
        inc = pos[:, None] >= np.asarray(cutoffs)[None, :]
        return Matching(inc, cutoffs, True)

    @staticmethod
    def full(market):
        return Matching.from_cutoffs(market, [0] * len(market.individuals))

    @staticmethod
    def empty(market):
        n = len(market.firms)
        return Matching.from_cutoffs(market, [n] * len(market.individuals))

    def matched_firms(self, market, individual_id):
        col = market.individual_index[individual_id]
        return tuple(market.firms[k].id for k in np.flatnonzero(self.incidence[:, col]))

    def matched_individuals(self, market, firm_id):
        row = market.firm_index[firm_id]
        return tuple(market.individuals[k].id for k in np.flatnonzero(self.incidence[row, :]))


def _threshold_classify(market, inc):
    order = list(market.firm_order_asc)
    valid = set(market.valid_cutoffs)
    n = len(order)
    sorted_inc = inc[order, :]
    cutoffs = []
    for col in range(sorted_inc.shape[1]):
        column = sorted_inc[:, col]
        matched = np.flatnonzero(column)
        c = n if matched.size == 0 else int(matched[0])
        if not column[c:].all() or c not in valid:
            return None
        cutoffs.append(c)
    return tuple(cutoffs)


# ---------------------------------------------------------------------------
# objective pieces


def weighted_sizes(matching, market):
    """Salience-weighted set size per individual (vector form)."""
    return matching.incidence.T.astype(float) @ market.firm_sigma


def weighted_size(matching, individual_id, market):
    """Salience-weighted size of one individual's matched set."""
    if individual_id not in market.individual_index:
        raise InputError(f"unknown individual id {individual_id}")
    col = market.individual_index[individual_id]
    row = matching.incidence[:, col]
    return float(market.firm_sigma[row].sum())


def _kernel_matrix(market, sizes):
    """h(size_i, sigma_i, sigma_f) for every (firm, individual) cell; may be inf at size 0."""
    return market.kernel(
        sizes[None, :], market.ind_sigma[None, :], market.firm_sigma[:, None]
    )


def firm_match_qualities(matching, market):
    sizes = weighted_sizes(matching, market)
    h = _kernel_matrix(market, sizes)
    h = np.where(matching.incidence, h, 0.0)
    if not np.all(np.isfinite(h)):
        raise NumericError("kernel evaluated non-finite on a matched cell")
    if float(h.min()) < 0:
        raise InvariantViolation("kernel evaluated negative on a matched cell")
    return h @ market.ind_mass


def firm_match_quality(matching, firm_id, market):
    """Kernel-weighted mass of a firm's matched individuals."""
    if firm_id not in market.firm_index:
        raise InputError(f"unknown firm id {firm_id}")
    return float(firm_match_qualities(matching, market)[market.firm_index[firm_id]])


def platform_objective(market, matching):
    """Total of firm payoffs at their match qualities plus mass-weighted individual payoffs."""
    return float(objective_batch(market, matching.incidence[None, :, :])[0])


def objective_batch(market, incidence):
    """Objective for a batch of incidence matrices, shape (B, firms, individuals)."""
    inc = np.asarray(incidence, dtype=bool)
    sizes = np.einsum("bfi,f->bi", inc, market.firm_sigma)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = market.kernel(
            sizes[:, None, :], market.ind_sigma[None, None, :], market.firm_sigma[None, :, None]
        )
    h = np.where(inc, h, 0.0)
    qual = np.einsum("bfi,i->bf", h, market.ind_mass)
    total = np.zeros(inc.shape[0])
    for fam, idx in market.firm_family_groups:
        cols = list(idx)
        total += fam(market.firm_v[cols][None, :], qual[:, cols]).sum(axis=1)
    ui = market.individual_payoff(market.ind_v[None, :], sizes)
    total += ui @ market.ind_mass
    if not np.all(np.isfinite(total)):
        raise NumericError("objective evaluated non-finite")
    return total


# ---------------------------------------------------------------------------
# supermodularity


@dataclass(frozen=True)
class SupermodularityResult:
    passed: bool
    witness: tuple | None = None  # (v_lo, v_hi, x_lo, x_hi, gap)

    def __bool__(self):
        return self.passed


def check_supermodularity(payoff, v_grid, x_grid, tol=SUPERMOD_TOL):
    """Whether U(v'',x'') + U(v',x') >= U(v'',x') + U(v',x'') on all grid pairs.

    Returns the failing quadruple as a witness instead of raising.
    """
    v_grid = np.asarray(v_grid, float)
    x_grid = np.asarray(x_grid, float)
    _require_grid(v_grid, "v_grid")
    _require_grid(x_grid, "x_grid")
    values = np.asarray(payoff(v_grid[:, None], x_grid[None, :]), float)
    return _matrix_supermodular(values, v_grid, x_grid, tol)


def _require_grid(grid, name):
    if grid.ndim != 1 or grid.size < 2:
        raise InputError(f"{name} must be a 1-d grid with at least two points")
    if np.any(np.diff(grid) < 0):
        raise InputError(f"{name} must be sorted ascending")


def _matrix_supermodular(values, v_grid, x_grid, tol):
    m, n = values.shape
    if m * m * n * n <= 1 << 22:
        cross = (
            values[:, None, :, None]
            + values[None, :, None, :]
            - values[:, None, None, :]
            - values[None, :, :, None]
        )
        iv, jv, ix, jx = np.meshgrid(
            np.arange(m), np.arange(m), np.arange(n), np.arange(n), indexing="ij"
        )
        mask = (iv > jv) & (ix > jx)
        bad = (cross < -tol) & mask
        if bad.any():
            w = np.argwhere(bad)[0]
            gap = float(cross[tuple(w)])
            return SupermodularityResult(
                False, (float(v_grid[w[1]]), float(v_grid[w[0]]), float(x_grid[w[3]]), float(x_grid[w[2]]), gap)
            )
        return SupermodularityResult(True)
    # large grids: adjacent increments imply the full set by telescoping
    inc = np.diff(values, axis=1)
    gaps = np.diff(inc, axis=0)
    if (gaps < -tol).any():
        i, j = np.argwhere(gaps < -tol)[0]
        return SupermodularityResult(
            False,
            (float(v_grid[i]), float(v_grid[i + 1]), float(x_grid[j]), float(x_grid[j + 1]), float(gaps[i, j])),
        )
    return SupermodularityResult(True)


@dataclass(frozen=True)
class OrderResult:
    order_indices: tuple | None
    order_values: tuple | None
    conflict: tuple | None = None  # (v_a, v_b, x_pair_1, x_pair_2)

    @property
    def found(self):
        return self.order_indices is not None


def find_supermodular_order(payoff, v_grid, x_grid, tol=SUPERMOD_TOL):
    """Permutation of v_grid along which size increments rank types consistently.

    Sorts by the total increment over the size range (stable, so payoffs that
    already pass check_supermodularity keep the identity order) and verifies by
    re-running the pairwise check under the permutation.  On failure returns a
    certificate: two types and two size pairs that rank them oppositely.
    """
    v_grid = np.asarray(v_grid, float)
    x_grid = np.asarray(x_grid, float)
    _require_grid(v_grid, "v_grid")
    _require_grid(x_grid, "x_grid")
    values = np.asarray(payoff(v_grid[:, None], x_grid[None, :]), float)
    totals = values[:, -1] - values[:, 0]
    order = sorted(range(len(v_grid)), key=lambda k: (totals[k], k))
    permuted = values[order, :]
    verdict = _matrix_supermodular(permuted, np.arange(len(order), dtype=float), x_grid, tol)
    if verdict.passed:
        return OrderResult(tuple(order), tuple(float(v_grid[k]) for k in order))
    conflict = _order_conflict(values, v_grid, x_grid, tol)
    return OrderResult(None, None, conflict)


def _order_conflict(values, v_grid, x_grid, tol):
    inc = np.diff(values, axis=1)  # (types, adjacent size pairs)
    n = values.shape[0]
    for a in range(n):
        for b in range(a + 1, n):
            d = inc[a] - inc[b]
            hi = np.flatnonzero(d > tol)
            lo = np.flatnonzero(d < -tol)
            if hi.size and lo.size:
                p, q = int(hi[0]), int(lo[0])
                return (
                    float(v_grid[a]),
                    float(v_grid[b]),
                    (float(x_grid[p]), float(x_grid[p + 1])),
                    (float(x_grid[q]), float(x_grid[q + 1])),
                )
    return None
