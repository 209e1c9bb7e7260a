"""Counterfactual payoff shifts, matching comparison, and welfare deltas.

Shifts raise the marginal value of match quality for targeted firms; the
comparison machinery re-solves both markets in an exhaustive regime and
verifies the predicted weak set movements.  Set comparisons use exact
inclusion on incidence matrices: matchings are discrete, so no tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import weighted_sizes, firm_match_qualities
from .errors import InputError, PreconditionError, StructureError
from .families import PayoffFamily, ScalarFn
from .mechanism import welfare_envelope_preconditions
from .solver import brute_force, solve_threshold, _firm_profile_order

ID_TOL = 1e-12
QUALITY_TOL = 1e-9


@dataclass(frozen=True)
class ShiftSpec:
    """A payoff change for a set of firms that raises marginal match value.

    kinds: "additive_slope" adds epsilon*x; "beta_scale" multiplies the
    affine slope by alpha(v) (increasing, positive, alpha >= 1 so differences
    rise); "replace" swaps in a new family that must itself dominate the old
    one in differences.
    """

    targets: tuple
    kind: str
    epsilon: float = 0.0
    alpha: ScalarFn | None = None
    replacement: PayoffFamily | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.kind not in ("additive_slope", "beta_scale", "replace"):
            raise InputError(f"unknown shift kind {self.kind!r}")
        if self.kind == "beta_scale" and self.alpha is None:
            raise InputError("beta_scale shift needs alpha")
        if self.kind == "replace" and self.replacement is None:
            raise InputError("replace shift needs a replacement family")


def _shift_family(market, firm_index, shift):
    fam = market.firm_family(firm_index)
    v = market.firm_v[firm_index]
    if shift.kind == "additive_slope":
        return fam.with_slope_bonus(shift.epsilon)
    if shift.kind == "replace":
        return shift.replacement
    scale = float(shift.alpha(v))
    if scale <= 0:
        raise PreconditionError("beta_scale needs a positive alpha")
    slope = float(fam.slope(v)) * scale
    intercept = float(fam.intercept(v))
    return PayoffFamily.affine(ScalarFn.constant(intercept), ScalarFn.constant(slope))


def apply_shift(market, shift):
    """New market differing only in the targeted firms' payoffs.

    Verifies the increasing-differences property of each shifted payoff on
    the quality grid and that the pre-shift supermodular firm order remains
    valid afterwards; either failure is a precondition error.
    """
    for t in shift.targets:
        if t not in market.firm_index:
            raise InputError(f"unknown firm id {t}")
    overrides = dict(market.firm_payoff_overrides)
    grid = market.quality_grid
    for t in shift.targets:
        k = market.firm_index[t]
        old = market.firm_family(k)
        new = _shift_family(market, k, shift)
        v = market.firm_v[k]
        old_inc = np.diff(old(v, grid))
        new_inc = np.diff(new(v, grid))
        if np.any(new_inc - old_inc < -ID_TOL):
            raise PreconditionError(
                f"shift does not weakly raise payoff differences for firm {t}"
            )
        overrides[t] = new
    base_order = _firm_profile_order(market, grid)
    shifted = replace(market, firm_payoff_overrides=overrides)
    try:
        _firm_profile_order(shifted, grid, order=base_order)
    except StructureError as exc:
        raise PreconditionError(
            "shift changes the supermodular firm order; comparative statics do not apply"
        ) from exc
    return shifted


# ---------------------------------------------------------------------------
# comparison


def _set_relation(before, after):
    before = set(before)
    after = set(after)
    if before == after:
        return "="
    if after < before:
        return "subset"
    if after > before:
        return "superset"
    return "incomparable"


@dataclass(frozen=True)
class Verdict:
    name: str
    applicable: bool
    passed: bool | None
    reason: str = ""


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    firm_relations: dict       # firm id -> relation of the new matched set vs old
    individual_relations: dict
    firm_size_delta: dict      # matched mass after minus before
    firm_quality_delta: dict
    individual_size_delta: dict
    verdicts: tuple
    duplicate_firm_sets: bool
    solve_before: object
    solve_after: object

    @property
    def failed_verdicts(self):
        return [v for v in self.verdicts if v.applicable and v.passed is False]


def _rows_as_sets(market, matching):
    return {
        f.id: frozenset(np.flatnonzero(matching.incidence[k, :]).tolist())
        for k, f in enumerate(market.firms)
    }


def _cols_as_sets(market, matching):
    return {
        i.id: frozenset(np.flatnonzero(matching.incidence[:, col]).tolist())
        for col, i in enumerate(market.individuals)
    }


def _concave_in_quality(market, tol=1e-9):
    grid = market.quality_grid
    for k in range(len(market.firms)):
        vals = market.firm_family(k)(market.firm_v[k], grid)
        if np.any(np.diff(np.diff(vals)) > tol):
            return False
    return True


def _kernel_nonincreasing(market, tol=1e-12):
    sizes = market.achievable_sizes
    sizes = np.unique(sizes[sizes > 0])
    if sizes.size < 2:
        return True
    h = market.kernel(sizes[:, None, None], market.ind_sigma[None, :, None], market.firm_sigma[None, None, :])
    return bool(np.all(np.diff(h, axis=0) <= tol))


def _all_affine(market):
    return all(market.firm_family(k).is_affine_in_x for k in range(len(market.firms)))


def compare(market, shifted, solver="brute", shift=None):
    """Re-solve both markets and report per-agent set movements with verdicts.

    Verdicts are asserted only in exhaustive regimes; each one carries its
    applicability conditions so inapplicable claims are reported, not judged.
    """
    solve = {"brute": brute_force, "threshold": solve_threshold}.get(solver)
    if solve is None:
        raise InputError("solver must be 'brute' or 'threshold'")
    rep_a = solve(market)
    rep_b = solve(shifted)
    exhaustive = rep_a.method != "coordinate_ascent" and rep_b.method != "coordinate_ascent"

    rows_a, rows_b = _rows_as_sets(market, rep_a.matching), _rows_as_sets(shifted, rep_b.matching)
    cols_a, cols_b = _cols_as_sets(market, rep_a.matching), _cols_as_sets(shifted, rep_b.matching)
    qual_a = firm_match_qualities(rep_a.matching, market)
    qual_b = firm_match_qualities(rep_b.matching, shifted)
    mass = market.ind_mass

    firm_rel = {fid: _set_relation(rows_a[fid], rows_b[fid]) for fid in rows_a}
    ind_rel = {iid: _set_relation(cols_a[iid], cols_b[iid]) for iid in cols_a}
    firm_mass_delta = {
        f.id: float(mass[list(rows_b[f.id])].sum() - mass[list(rows_a[f.id])].sum())
        for f in market.firms
    }
    firm_quality_delta = {
        f.id: float(qual_b[k] - qual_a[k]) for k, f in enumerate(market.firms)
    }
    sizes_a = weighted_sizes(rep_a.matching, market)
    sizes_b = weighted_sizes(rep_b.matching, shifted)
    ind_size_delta = {i.id: float(sizes_b[c] - sizes_a[c]) for c, i in enumerate(market.individuals)}

    dup = len(set(rows_a.values())) < len(rows_a) or len(set(rows_b.values())) < len(rows_b)
    verdicts = _build_verdicts(
        market, shift, exhaustive, firm_rel, firm_quality_delta, rows_a, rows_b, cols_a, cols_b
    )
    return ComparisonReport(
        firm_rel, ind_rel, firm_mass_delta, firm_quality_delta, ind_size_delta,
        tuple(verdicts), dup, rep_a, rep_b,
    )


def _build_verdicts(market, shift, exhaustive, firm_rel, quality_delta, rows_a, rows_b, cols_a, cols_b):
    verdicts = []
    if shift is None:
        return verdicts
    if not exhaustive:
        verdicts.append(Verdict("exhaustive_regime", False, None, "heuristic solve; verdicts informational"))
        return verdicts
    targets = list(shift.targets)
    single = len(targets) == 1
    concave = _concave_in_quality(market)
    decreasing = _kernel_nonincreasing(market)
    affine = _all_affine(market)
    try:
        _firm_profile_order(market, market.quality_grid)
        supermod = True
    except StructureError:
        supermod = False

    def grows(fid):
        return firm_rel[fid] in ("=", "superset")

    def shrinks(fid):
        return firm_rel[fid] in ("=", "subset")

    # quality of the shifted firm rises; with several simultaneous shifts the
    # targets compete over the same individuals, so the claim is single-firm
    applicable = single and supermod and decreasing
    passed = all(quality_delta[t] >= -QUALITY_TOL for t in targets) if applicable else None
    verdicts.append(Verdict(
        "shifted_quality_rises", applicable, passed,
        "" if applicable else "needs a single shifted firm, supermodularity, and a nonincreasing kernel",
    ))

    if single:
        k = targets[0]
        v_k = market.firm_v[market.firm_index[k]]
        applicable = supermod and concave and decreasing
        reason = "" if applicable else "needs concave firm payoffs and a nonincreasing kernel"
        lower = [f.id for f in market.firms if f.v < v_k and f.id != k]
        verdicts.append(Verdict("shifted_firm_set_grows", applicable, grows(k) if applicable else None, reason))
        verdicts.append(Verdict(
            "lower_firms_shrink", applicable,
            all(shrinks(fid) for fid in lower) if applicable else None, reason,
        ))
        # individuals matched with the shifted firm before the change
        hit = {market.individuals[c].id for c in rows_a[k]}
        verdicts.append(Verdict(
            "matched_individuals_shrink", applicable,
            all(cols_b[iid] <= cols_a[iid] for iid in hit) if applicable else None, reason,
        ))
        verdicts.append(Verdict(
            "shifted_set_cardinality_grows", affine and supermod,
            (len(rows_b[k]) >= len(rows_a[k])) if (affine and supermod) else None,
            "" if (affine and supermod) else "needs affine firm payoffs",
        ))
        lowest = min(market.firms, key=lambda f: (f.v, f.id)).id
        if affine and supermod and k == lowest:
            k_row = market.firm_index[k]
            ok = all(
                cols_b[iid] == cols_a[iid] or cols_b[iid] == cols_a[iid] | {k_row}
                for iid in cols_a
            )
            verdicts.append(Verdict("lowest_firm_add_only", True, ok))
        else:
            verdicts.append(Verdict("lowest_firm_add_only", False, None,
                                    "needs an affine shift on the lowest-type firm"))
    else:
        applicable = supermod and concave and decreasing
        min_target_v = min(market.firm_v[market.firm_index[t]] for t in targets)
        below = [f.id for f in market.firms if f.v < min_target_v and f.id not in targets]
        verdicts.append(Verdict(
            "firms_below_all_targets_shrink", applicable,
            all(shrinks(fid) for fid in below) if applicable else None,
            "" if applicable else "needs concave firm payoffs and a nonincreasing kernel",
        ))
    return verdicts


# ---------------------------------------------------------------------------
# welfare deltas through the envelope


@dataclass(frozen=True, eq=False)
class WelfareDeltaReport:
    grid: np.ndarray
    before: np.ndarray
    after: np.ndarray
    delta: np.ndarray
    movement: str              # "shrink", "grow", "equal", or "mixed"
    sign_claim: str | None     # "all_worse", "all_better", "zero"
    claim_holds: bool | None


def welfare_delta(market, shifted, matching_before, matching_after, tol=1e-9):
    """Per-type envelope payoff change between two solved matchings.

    The sign claim is asserted only when every individual's set moved weakly
    in one direction and the participation and monotonicity preconditions
    hold in both matchings; otherwise the deltas are reported unjudged.
    """
    if not np.allclose(market.ind_v, shifted.ind_v):
        raise InputError("markets must share the individual type grid")
    grid = market.ind_v
    x_before = weighted_sizes(matching_before, market)
    x_after = weighted_sizes(matching_after, shifted)

    def envelope(x):
        marginal = market.individual_payoff.dv(grid, x)
        steps = 0.5 * (marginal[1:] + marginal[:-1]) * np.diff(grid)
        return np.concatenate([[0.0], np.cumsum(steps)])

    v_before = envelope(x_before)
    v_after = envelope(x_after)
    delta = v_after - v_before

    inc_a, inc_b = matching_before.incidence, matching_after.incidence
    shrink = bool(np.all(~inc_b | inc_a))
    grow = bool(np.all(~inc_a | inc_b))
    movement = "equal" if (shrink and grow) else "shrink" if shrink else "grow" if grow else "mixed"

    claim = None
    holds = None
    try:
        pre_a = welfare_envelope_preconditions(market, matching_before)
        pre_b = welfare_envelope_preconditions(shifted, matching_after)
        gated = pre_a.satisfied and pre_b.satisfied
    except PreconditionError:
        gated = False
    if gated and movement != "mixed":
        if movement == "equal":
            claim, holds = "zero", bool(np.all(np.abs(delta) <= tol))
        elif movement == "shrink":
            claim, holds = "all_worse", bool(np.all(delta <= tol))
        else:
            claim, holds = "all_better", bool(np.all(delta >= -tol))
    return WelfareDeltaReport(grid, v_before, v_after, delta, movement, claim, holds)


# ---------------------------------------------------------------------------
# slope-function comparative statics for quality-weighted matching

@dataclass(frozen=True)
class BetaContext:
    """One individual facing a firm grid whose types enter their set quality.

    firm_values ascending and positive; firm_weights are the grid masses;
    the kernel takes the set quality (weight-summed firm values) as its size
    argument.  individual_payoff None means the platform ignores the
    individual side.
    """

    firm_values: tuple
    firm_weights: tuple
    individual_value: float = 1.0
    individual_payoff: PayoffFamily | None = None
    kernel: object = None

    def __post_init__(self):
        v = np.asarray(self.firm_values, float)
        w = np.asarray(self.firm_weights, float)
        if v.size == 0 or v.shape != w.shape:
            raise InputError("firm grid and weights must be nonempty and aligned")
        if np.any(np.diff(v) <= 0) or np.any(v <= 0):
            raise InputError("firm values must be positive and strictly increasing")
        if np.any(w <= 0):
            raise InputError("firm weights must be > 0")
        if self.kernel is None:
            raise InputError("a kernel is required")


def _suffix_stats(ctx, beta):
    v = np.asarray(ctx.firm_values, float)
    w = np.asarray(ctx.firm_weights, float)
    b = np.asarray(beta, float)
    quality = np.concatenate([np.cumsum((v * w)[::-1])[::-1], [0.0]])
    weight = np.concatenate([np.cumsum((b * w)[::-1])[::-1], [0.0]])
    return quality, weight


def _pointwise_threshold(ctx, beta):
    quality, weight = _suffix_stats(ctx, beta)
    vals = np.empty(quality.size)
    for c in range(quality.size):
        u = 0.0
        if ctx.individual_payoff is not None:
            u = float(ctx.individual_payoff(ctx.individual_value, quality[c]))
        h_term = 0.0
        if quality[c] > 0:
            h_term = float(ctx.kernel(quality[c], ctx.individual_value, 1.0)) * weight[c]
        vals[c] = u + h_term
    c_star = int(np.argmax(vals))
    return c_star, vals


def _threshold_type(ctx, c):
    v = np.asarray(ctx.firm_values, float)
    return float(v[c]) if c < v.size else np.inf


@dataclass(frozen=True)
class BetaComparisonReport:
    cutoff_before: int
    cutoff_after: int
    threshold_before: float
    threshold_after: float
    verdicts: tuple


def beta_threshold_compstat(ctx, beta, beta_tilde):
    """Pointwise-optimal type thresholds under two firm slope functions.

    Requires beta/v and beta_tilde/v nondecreasing on the grid (the order
    fallback for non-monotone ratios is not implemented) and a kernel that
    strictly decreases in set quality.  Attaches the inequality verdicts
    whose premises the pair (beta, beta_tilde) actually meets.
    """
    v = np.asarray(ctx.firm_values, float)
    w = np.asarray(ctx.firm_weights, float)
    beta = np.asarray(beta, float)
    beta_tilde = np.asarray(beta_tilde, float)
    for name, b in (("beta", beta), ("beta_tilde", beta_tilde)):
        if np.any(np.diff(b / v) < -ID_TOL):
            raise PreconditionError(f"{name}/v must be nondecreasing on the firm grid")
    quality, _ = _suffix_stats(ctx, beta)
    pos = quality[quality > 0]
    h = np.asarray([float(ctx.kernel(q, ctx.individual_value, 1.0)) for q in np.sort(pos)])
    if np.any(np.diff(h) >= 0):
        raise PreconditionError("kernel must be strictly decreasing in set quality")

    c_a, _ = _pointwise_threshold(ctx, beta)
    c_b, _ = _pointwise_threshold(ctx, beta_tilde)
    t_a, t_b = _threshold_type(ctx, c_a), _threshold_type(ctx, c_b)

    verdicts = []
    same = np.abs(beta_tilde - beta) <= ID_TOL
    below = v <= t_a + ID_TOL if np.isfinite(t_a) else np.ones_like(v, dtype=bool)
    above = ~below
    if bool(same[below].all()):
        verdicts.append(Verdict("unchanged_below_threshold_raises", True, c_b >= c_a))
    if bool(same[above].all()):  # vacuously satisfied when nothing sits above the threshold
        verdicts.append(Verdict("unchanged_above_threshold_lowers", True, c_b <= c_a))

    no_individual_side = ctx.individual_payoff is None
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(beta) > 0, beta_tilde / beta, np.nan)
    scaling = np.all((beta == 0) & (beta_tilde == 0) | (np.abs(beta) > 0))
    finite = ratio[np.isfinite(ratio)]
    alpha_ok = finite.size > 0 and np.all(finite > 0) and np.all(np.diff(finite) >= -ID_TOL)
    total_ok = float(np.dot(beta, w)) >= -ID_TOL
    applicable = bool(no_individual_side and scaling and alpha_ok and total_ok)
    verdicts.append(Verdict(
        "positive_scaling_shrinks", applicable, (c_b >= c_a) if applicable else None,
        "" if applicable else "needs no individual side, beta_tilde = alpha*beta with alpha increasing positive, and a nonnegative beta total",
    ))
    return BetaComparisonReport(c_a, c_b, t_a, t_b, tuple(verdicts))


# ---------------------------------------------------------------------------
# weighted tail-integral inequality


@dataclass(frozen=True)
class TailCheckReport:
    applicable: bool
    holds: bool | None
    lhs: float
    rhs: float


def tail_weighted_integral_check(alpha, k, grid, tol=1e-10):
    """Whether the integral of alpha*k dominates alpha(start) times the integral of k.

    Premise: every tail integral of k is nonnegative (trapezoid on the grid)
    and alpha is increasing.  When the premise fails the report says not
    applicable rather than judging the inequality.
    """
    grid = np.asarray(grid, float)
    alpha = np.asarray(alpha, float)
    k = np.asarray(k, float)
    if grid.ndim != 1 or grid.size < 2 or alpha.shape != grid.shape or k.shape != grid.shape:
        raise InputError("alpha, k, grid must be aligned 1-d arrays with >= 2 points")
    if np.any(np.diff(alpha) < -ID_TOL):
        raise InputError("alpha must be increasing")
    steps = 0.5 * (k[1:] + k[:-1]) * np.diff(grid)
    tails = np.concatenate([np.cumsum(steps[::-1])[::-1], [0.0]])
    lhs_steps = 0.5 * ((alpha * k)[1:] + (alpha * k)[:-1]) * np.diff(grid)
    lhs = float(np.sum(lhs_steps))
    rhs = float(alpha[0] * np.sum(steps))
    if np.any(tails < -ID_TOL):
        return TailCheckReport(False, None, lhs, rhs)
    return TailCheckReport(True, lhs >= rhs - tol, lhs, rhs)
