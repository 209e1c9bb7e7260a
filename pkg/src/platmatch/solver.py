"""Optimal-matching solvers and the brute-force oracle.

brute_force enumerates raw incidence matrices (the oracle); solve_threshold
searches cutoff space, which is exhaustive at desk scale and falls back to
seeded coordinate ascent on large instances; solve_pointwise_affine and
solve_horizontal exploit separability when firm payoffs are affine in match
quality.  iron_monotone is the mass-weighted least-squares projection onto
nondecreasing sequences used by the screening applications.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    Matching,
    check_supermodularity,
    find_supermodular_order,
    objective_batch,
    platform_objective,
    weighted_sizes,
    firm_match_qualities,
)
from .errors import InputError, SizeError, StructureError

BRUTE_CELL_CAP = 20
THRESHOLD_ENUM_CAP = 10_000_000
ASCENT_IMPROVE_TOL = 1e-10
ASCENT_RESTARTS = 5
_CHUNK = 1 << 14


@dataclass(frozen=True)
class ThresholdMatching:
    """Per-individual cutoffs into an ascending firm order (0=all, n=none)."""

    cutoffs: tuple
    firm_order: tuple  # firm indices, ascending in the solve order

    def to_matching(self, market):
        if list(self.firm_order) == list(market.firm_order_asc):
            return Matching.from_cutoffs(market, self.cutoffs)
        pos = np.empty(len(market.firms), dtype=int)
        pos[list(self.firm_order)] = np.arange(len(market.firms))
        inc = pos[:, None] >= np.asarray(self.cutoffs)[None, :]
        return Matching.from_incidence(market, inc)


@dataclass(frozen=True, eq=False)
class SolveReport:
    matching: Matching
    objective: float
    method: str
    iterations: int = 0
    oracle_gap: float | None = None


def _lex_key(inc):
    return np.asarray(inc, dtype=np.uint8).tobytes()


def _best_of_batch(objs, incs, best):
    """Track (objective, lex-smallest incidence bytes, incidence) across chunks."""
    top = float(objs.max())
    if best is None or top > best[0]:
        rows = np.flatnonzero(objs == top)
        key = min(_lex_key(incs[r]) for r in rows)
        pick = next(r for r in rows if _lex_key(incs[r]) == key)
        return (top, key, incs[pick].copy())
    if top == best[0]:
        rows = np.flatnonzero(objs == top)
        key = min(_lex_key(incs[r]) for r in rows)
        if key < best[1]:
            pick = next(r for r in rows if _lex_key(incs[r]) == key)
            return (top, key, incs[pick].copy())
    return best


def brute_force(market, monotone_only=False):
    """Global maximizer over raw incidence matrices, or over threshold matchings.

    Ties break to the lexicographically smallest incidence (row-major).
    """
    n_f = len(market.firms)
    n_i = len(market.individuals)
    if monotone_only:
        return _enumerate_thresholds(market, market.firm_order_asc, "brute_force_threshold")
    cells = n_f * n_i
    if cells > BRUTE_CELL_CAP:
        raise SizeError(f"{cells} cells exceeds the 2^{BRUTE_CELL_CAP} enumeration cap")
    total = 1 << cells
    best = None
    bits = np.arange(cells)
    for start in range(0, total, _CHUNK):
        stop = min(start + _CHUNK, total)
        masks = np.arange(start, stop, dtype=np.int64)
        inc = ((masks[:, None] >> bits[None, :]) & 1).astype(bool).reshape(-1, n_f, n_i)
        objs = objective_batch(market, inc)
        best = _best_of_batch(objs, inc, best)
    matching = Matching.from_incidence(market, best[2])
    return SolveReport(matching, best[0], "brute_force", iterations=total)


def _enumerate_thresholds(market, order, method):
    n_i = len(market.individuals)
    cuts = np.asarray(market.valid_cutoffs if list(order) == list(market.firm_order_asc)
                      else range(len(market.firms) + 1))
    p = len(cuts)
    total = p ** n_i
    if total > THRESHOLD_ENUM_CAP:
        raise SizeError(f"{total} cutoff tuples exceeds the {THRESHOLD_ENUM_CAP} cap")
    pos = np.empty(len(market.firms), dtype=int)
    pos[list(order)] = np.arange(len(market.firms))
    radix = p ** np.arange(n_i)
    best = None
    for start in range(0, total, _CHUNK):
        stop = min(start + _CHUNK, total)
        ticket = np.arange(start, stop, dtype=np.int64)
        digits = (ticket[:, None] // radix[None, :]) % p
        cvals = cuts[digits]  # (B, n_i)
        inc = pos[None, :, None] >= cvals[:, None, :]
        objs = objective_batch(market, inc)
        best = _best_of_batch(objs, inc, best)
    matching = Matching.from_incidence(market, best[2])
    return SolveReport(matching, best[0], method, iterations=total)


def _verify_supermodular_side(payoff, v_grid, x_grid, side):
    """Identity order if supermodular, else a discovered order; StructureError if neither."""
    v_grid = np.asarray(v_grid, float)
    if np.unique(v_grid).size < 2 or len(x_grid) < 2:
        return None
    verdict = check_supermodularity(payoff, np.unique(v_grid), x_grid)
    if verdict.passed:
        return None
    found = find_supermodular_order(payoff, np.unique(v_grid), x_grid)
    if not found.found:
        raise StructureError(
            f"{side} payoff is not supermodular under any type order", witness=verdict.witness
        )
    return found


def _firm_profile_order(market, x_grid, order=None, tol=1e-12):
    """Check order-supermodularity of the per-firm payoff profile.

    With payoff overrides each firm carries its own size->payoff map, so the
    check runs on the profile, not a single family.  Returns the ascending
    firm order that works, or raises with a witness pair.
    """
    n = len(market.firms)
    x_grid = np.asarray(x_grid, float)
    values = np.empty((n, x_grid.size))
    for k in range(n):
        values[k] = market.firm_family(k)(market.firm_v[k], x_grid)
    candidates = [tuple(order)] if order is not None else []
    if order is None:
        candidates.append(tuple(market.firm_order_asc))
        totals = values[:, -1] - values[:, 0]
        candidates.append(tuple(sorted(range(n), key=lambda k: (totals[k], market.firm_v[k], k))))
    witness = None
    for cand in candidates:
        perm = values[list(cand), :]
        inc = np.diff(perm, axis=1)
        gaps = np.diff(inc, axis=0)
        if gaps.size == 0 or gaps.min() >= -tol:
            return cand
        if witness is None:
            i, j = np.argwhere(gaps < -tol)[0]
            witness = (market.firms[cand[i]].id, market.firms[cand[i + 1]].id, float(x_grid[j]))
    raise StructureError(
        "firm payoff profile admits no supermodular order on the quality grid", witness=witness
    )


def solve_threshold(market, seed=0):
    """Maximizer over threshold matchings (exhaustive at desk scale).

    Preconditions: both payoffs supermodular on the scenario grids, possibly
    after reordering types, and a non-negative kernel (validated at market
    construction).  Beyond the enumeration cap, runs seeded cyclic coordinate
    ascent on cutoffs from the full-matching start with random restarts.
    """
    sizes = market.achievable_sizes
    _verify_supermodular_side(market.individual_payoff, market.ind_v, sizes, "individual")
    order = _firm_profile_order(market, market.quality_grid)

    n_i = len(market.individuals)
    p = len(market.valid_cutoffs) if list(order) == list(market.firm_order_asc) else len(market.firms) + 1
    if p ** n_i <= THRESHOLD_ENUM_CAP:
        return _enumerate_thresholds(market, order, "threshold_exhaustive")
    return _coordinate_ascent(market, order, seed)


def _coordinate_ascent(market, order, seed):
    n_i = len(market.individuals)
    n_f = len(market.firms)
    cuts_options = np.asarray(
        market.valid_cutoffs if list(order) == list(market.firm_order_asc) else range(n_f + 1)
    )
    pos = np.empty(n_f, dtype=int)
    pos[list(order)] = np.arange(n_f)
    rng = np.random.default_rng(seed)

    def evaluate(cvals):
        inc = pos[:, None] >= cvals[None, :]
        return float(objective_batch(market, inc[None])[0])

    def ascend(cvals):
        current = evaluate(cvals)
        passes = 0
        improved = True
        while improved:
            improved = False
            passes += 1
            for i in range(n_i):
                trial = np.repeat(cvals[None, :], len(cuts_options), axis=0)
                trial[:, i] = cuts_options
                incs = pos[None, :, None] >= trial[:, None, :]
                objs = objective_batch(market, incs)
                k = int(np.argmax(objs))
                if objs[k] > current + ASCENT_IMPROVE_TOL:
                    cvals = trial[k]
                    current = float(objs[k])
                    improved = True
        return cvals, current, passes

    best_c, best_obj, iters = ascend(np.full(n_i, cuts_options[0]))
    for _ in range(ASCENT_RESTARTS):
        start = rng.choice(cuts_options, size=n_i)
        c, obj, passes = ascend(start)
        iters += passes
        if obj > best_obj:
            best_c, best_obj = c, obj
    inc = pos[:, None] >= best_c[None, :]
    matching = Matching.from_incidence(market, inc)
    return SolveReport(matching, best_obj, "coordinate_ascent", iterations=iters)


# ---------------------------------------------------------------------------
# marginal-individual conditions


def foc_residual(market, matching, firm_id, direction="drop", linearized=False):
    """Per-mass value of the marginal individual on a firm's cutoff boundary.

    direction "drop": the lowest-type individual the firm is matched with;
    the residual is the objective gain (per unit mass) from that membership,
    which is >= 0 at an optimum.  direction "add": the highest-type
    individual just below the cutoff; the gain from adding them is <= 0 at an
    optimum.  The default evaluates the exact one-individual objective move;
    linearized=True instead combines central-difference marginal firm payoffs
    with the salience change, which matches the continuum first-order
    condition but can miss the sign on coarse grids.
    """
    if matching.threshold_repr is None:
        raise StructureError("matching is not threshold-representable")
    if np.unique(market.firm_sigma).size > 1 or np.unique(market.ind_sigma).size > 1:
        raise StructureError("marginal conditions assume no horizontal differentiation")
    if firm_id not in market.firm_index:
        raise InputError(f"unknown firm id {firm_id}")
    row = market.firm_index[firm_id]
    col = _marginal_individual(market, matching, row, direction)
    if col is None:
        raise InputError(f"firm {firm_id} has no marginal individual in direction {direction!r}")

    inc_with = matching.incidence.copy()
    inc_without = matching.incidence.copy()
    if direction == "drop":
        inc_without[row, col] = False
    else:
        inc_with[row, col] = True
    mass = market.ind_mass[col]
    if not linearized:
        objs = objective_batch(market, np.stack([inc_with, inc_without]))
        return float((objs[0] - objs[1]) / mass)
    return _linearized_residual(market, matching, inc_with, inc_without, row, col)


def _marginal_individual(market, matching, row, direction):
    if direction not in ("drop", "add"):
        raise InputError("direction must be 'drop' or 'add'")
    matched = np.flatnonzero(matching.incidence[row, :])
    if direction == "drop":
        return int(matched[0]) if matched.size else None
    unmatched = np.flatnonzero(~matching.incidence[row, :])
    return int(unmatched[-1]) if unmatched.size else None


def _linearized_residual(market, matching, inc_with, inc_without, row, col):
    sizes_with = inc_with[:, col].astype(float) @ market.firm_sigma
    sizes_without = inc_without[:, col].astype(float) @ market.firm_sigma
    qualities = firm_match_qualities(matching, market)
    sig_i = market.ind_sigma[col]
    h_with = market.kernel(sizes_with, sig_i, market.firm_sigma)
    h_without = market.kernel(sizes_without, sig_i, market.firm_sigma)
    value = 0.0
    for k in np.flatnonzero(inc_with[:, col]):
        fam = market.firm_family(k)
        marginal = float(fam.dx(market.firm_v[k], qualities[k]))
        if k == row:
            value += marginal * float(h_with[k])
        else:
            value += marginal * float(h_with[k] - h_without[k])
    u = market.individual_payoff
    v_i = market.ind_v[col]
    value += float(u(v_i, sizes_with) - u(v_i, sizes_without))
    return value


# ---------------------------------------------------------------------------
# affine firm payoffs: the problem separates across individuals


def _require_affine(market):
    slopes = np.empty(len(market.firms))
    intercepts = np.empty(len(market.firms))
    for k in range(len(market.firms)):
        fam = market.firm_family(k)
        if not fam.is_affine_in_x:
            raise StructureError("firm payoff must be affine in match quality")
        slopes[k] = fam.slope(market.firm_v[k])
        intercepts[k] = fam.intercept(market.firm_v[k])
    return slopes, intercepts


def solve_pointwise_affine(market):
    """Per-individual maximization when firm payoffs are affine in quality.

    Candidate sets for each individual are the prefixes of the firms sorted
    by descending marginal value b(v); for a fixed set size no other set
    gives a larger firm-side total, and under supermodular (nondecreasing)
    b these prefixes are exactly the vertical-type threshold sets.
    """
    slopes, intercepts = _require_affine(market)
    n_f = len(market.firms)
    order = sorted(range(n_f), key=lambda k: (-slopes[k], -market.firm_v[k], market.firms[k].id))
    sig = market.firm_sigma[order]
    beta = slopes[order]
    cum_sig = np.concatenate([[0.0], np.cumsum(sig)])

    inc = np.zeros((n_f, len(market.individuals)), dtype=bool)
    for i in range(len(market.individuals)):
        best_len, best_val = 0, -np.inf
        for n in range(n_f + 1):
            size = cum_sig[n]
            u_term = float(market.individual_payoff(market.ind_v[i], size))
            firm_term = 0.0
            if n:
                h = market.kernel(size, market.ind_sigma[i], sig[:n])
                firm_term = float(np.dot(beta[:n], h))
            val = u_term + firm_term
            if val > best_val + 1e-15:
                best_len, best_val = n, val
        for k in order[:best_len]:
            inc[k, i] = True
    matching = Matching.from_incidence(market, inc)
    return SolveReport(matching, platform_objective(market, matching), "pointwise_affine")


@dataclass(frozen=True)
class HorizontalThresholds:
    """Per-individual type cutoffs by firm-salience bucket with slope labels.

    cutoffs maps individual id -> tuple of (sigma_f, cutoff type or inf);
    slope is "decreasing", "increasing", or "flat" in sigma_f; pivot is the
    marginal size value U_2 + sum of matched slopes times the kernel's size
    derivative; includes_negative flags matched negative-slope firms.
    v_boundary is the lowest individual type matched with a negative-value
    firm (None when no one is).
    """

    cutoffs: dict
    slope: dict
    pivot: dict
    includes_negative: dict
    v_boundary: float | None
    consistent: bool


def solve_horizontal(market, subset_cap=1 << 20):
    """Exact per-individual subset choice under affine firm payoffs.

    Requires the kernel to be nonincreasing in match size and in firm
    salience on the scenario range.  Firms' marginal values may be negative.
    """
    slopes, _ = _require_affine(market)
    _require_kernel_decreasing(market)
    n_f = len(market.firms)
    if (1 << n_f) > subset_cap:
        raise SizeError(f"2^{n_f} subsets exceeds the per-individual enumeration cap")
    masks = ((np.arange(1 << n_f)[:, None] >> np.arange(n_f)) & 1).astype(bool)
    subset_sizes = masks.astype(float) @ market.firm_sigma

    inc = np.zeros((n_f, len(market.individuals)), dtype=bool)
    for i in range(len(market.individuals)):
        with np.errstate(divide="ignore", invalid="ignore"):
            h = market.kernel(
                subset_sizes[:, None], market.ind_sigma[i], market.firm_sigma[None, :]
            )
        firm_terms = np.where(masks, h * slopes[None, :], 0.0).sum(axis=1)
        vals = market.individual_payoff(market.ind_v[i], subset_sizes) + firm_terms
        inc[:, i] = masks[int(np.argmax(vals))]
    matching = Matching.from_incidence(market, inc)
    report = SolveReport(matching, platform_objective(market, matching), "horizontal_enumeration")
    return _classify_horizontal(market, matching, slopes), report


def _require_kernel_decreasing(market, tol=1e-12):
    sizes = market.achievable_sizes
    sizes = np.unique(sizes[sizes > 0])
    sig_f = np.unique(market.firm_sigma)
    for si in np.unique(market.ind_sigma):
        h = market.kernel(sizes[:, None], si, sig_f[None, :])
        if sizes.size > 1 and np.any(np.diff(h, axis=0) > tol):
            raise StructureError("kernel must be nonincreasing in match size")
        if sig_f.size > 1 and np.any(np.diff(h, axis=1) > tol):
            raise StructureError("kernel must be nonincreasing in firm salience")


def _classify_horizontal(market, matching, slopes, step=1e-6):
    cutoffs, slope_label, pivots, has_negative = {}, {}, {}, {}
    v_boundary = None
    consistent = True
    sizes = weighted_sizes(matching, market)
    for i, ind in enumerate(market.individuals):
        size = sizes[i]
        matched = np.flatnonzero(matching.incidence[:, i])
        # kernel slope in the size argument, one term per matched firm
        h_up = market.kernel(size + step, market.ind_sigma[i], market.firm_sigma[matched])
        h_dn = market.kernel(max(size - step, 0.0), market.ind_sigma[i], market.firm_sigma[matched])
        infra = float(np.dot(slopes[matched], (h_up - h_dn) / (2 * step))) if matched.size else 0.0
        pivot = float(market.individual_payoff.dx(ind.v, size)) + infra
        pivots[ind.id] = pivot

        buckets = []
        for s in sorted(set(market.firm_sigma)):
            in_bucket = np.flatnonzero(market.firm_sigma == s)
            hit = [k for k in in_bucket if matching.incidence[k, i]]
            cut = float(min(market.firm_v[hit])) if hit else np.inf
            buckets.append((float(s), cut))
        cutoffs[ind.id] = tuple(buckets)
        finite = [c for _, c in buckets if np.isfinite(c)]
        if len(finite) < 2:
            label = "flat"
        else:
            label = "decreasing" if pivot >= 0 else "increasing"
        slope_label[ind.id] = label
        if label == "decreasing" and any(b > a + 1e-12 for a, b in zip(finite, finite[1:])):
            consistent = False
        if label == "increasing" and any(b < a - 1e-12 for a, b in zip(finite, finite[1:])):
            consistent = False

        neg = bool(matched.size and np.any(slopes[matched] < 0))
        has_negative[ind.id] = neg
        if neg and (v_boundary is None or ind.v < v_boundary):
            v_boundary = float(ind.v)
    return HorizontalThresholds(cutoffs, slope_label, pivots, has_negative, v_boundary, consistent)


# ---------------------------------------------------------------------------
# monotone projection (pool adjacent violators)


def iron_monotone(values, masses):
    """Mass-weighted least-squares projection onto nondecreasing sequences.

    Each pooled block keeps its mass-weighted mean, so already-monotone
    inputs are fixed points.
    """
    values = np.asarray(values, float)
    masses = np.asarray(masses, float)
    if values.shape != masses.shape or values.ndim != 1:
        raise InputError("values and masses must be 1-d and aligned")
    if np.any(masses <= 0):
        raise InputError("masses must be > 0")
    levels, weights, counts = [], [], []
    for v, w in zip(values, masses):
        levels.append(v)
        weights.append(w)
        counts.append(1)
        while len(levels) > 1 and levels[-2] > levels[-1]:
            v2, w2, c2 = levels.pop(), weights.pop(), counts.pop()
            v1, w1, c1 = levels.pop(), weights.pop(), counts.pop()
            levels.append((v1 * w1 + v2 * w2) / (w1 + w2))
            weights.append(w1 + w2)
            counts.append(c1 + c2)
    out = np.empty_like(values)
    pos = 0
    for v, c in zip(levels, counts):
        out[pos : pos + c] = v
        pos += c
    return out
