"""Seeded property suites: the structural claims, each verified against its
brute-force or closed-form oracle at desk scale.

Each suite returns a SuiteResult with one failure string per violated claim;
an empty failure list is a pass.  Suites are deterministic from their seed
and are shared by the test suite and the command-line `properties` runner.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import sampling
from .compstat import (
    BetaContext,
    ShiftSpec,
    apply_shift,
    beta_threshold_compstat,
    compare,
    tail_weighted_integral_check,
    welfare_delta,
)
from .core import FirmType, weighted_sizes, firm_match_qualities
from .errors import PlatmatchError, PreconditionError
from .families import CompetitionKernel, PayoffFamily, ShapeFn
from .mechanism import DistributionSpec, payments_and_revenue
from .monopcomp import (
    CesParams,
    acquire_cell,
    bundle_utility,
    ces_demand,
    counterfactual_compare,
    markup_price,
    refine_partition,
    salience_kernel,
    solve_retail,
)
from .mvpd import (
    MvpdSpec,
    check_bundle_value_condition,
    merger_compare,
    merger_transform,
    menu_to_sizes,
    mvpd_objective,
    solve_mvpd,
)
from .solver import brute_force, solve_threshold

OBJECTIVE_TOL = 1e-9


@dataclass
class SuiteResult:
    name: str
    trials: int
    failures: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return not self.failures


SUPERMODULAR_PAYOFFS = ("linear", "log", "sqrt")
CONCAVE_PAYOFFS = ("log", "sqrt", "linear")


def threshold_oracle_suite(trials=100, seed=0):
    """Cutoff-space optima equal unrestricted brute force; optima are
    threshold-representable with monotone cutoffs and monotone match sizes."""
    rng = np.random.default_rng(seed)
    result = SuiteResult("threshold-oracle", trials)
    start = time.monotonic()
    for t in range(trials):
        market = sampling.random_market(
            rng,
            u_i=str(rng.choice(SUPERMODULAR_PAYOFFS)),
            u_f=str(rng.choice(SUPERMODULAR_PAYOFFS)),
        )
        oracle = brute_force(market)
        fast = solve_threshold(market)
        if abs(oracle.objective - fast.objective) > OBJECTIVE_TOL:
            result.failures.append(
                f"trial {t}: cutoff optimum {fast.objective!r} missed brute force {oracle.objective!r}"
            )
        if not oracle.matching.representable:
            result.failures.append(f"trial {t}: brute-force optimum is not threshold-representable")
            continue
        cuts = np.asarray(oracle.matching.threshold_repr)
        if np.any(np.diff(cuts) > 0):
            result.failures.append(f"trial {t}: cutoffs rise with individual type: {cuts.tolist()}")
        sizes = weighted_sizes(oracle.matching, market)
        if np.any(np.diff(sizes) < -1e-12):
            result.failures.append(f"trial {t}: higher-type individual got a smaller set")
        quals = firm_match_qualities(oracle.matching, market)
        by_type = quals[np.argsort(market.firm_v, kind="stable")]
        if np.any(np.diff(by_type) < -1e-12):
            result.failures.append(f"trial {t}: higher-type firm got a lower-quality set")
    result.details["runtime_seconds"] = time.monotonic() - start
    return result


def _shift_trial(rng, multi):
    while True:
        market = sampling.random_market(
            rng,
            u_f=str(rng.choice(CONCAVE_PAYOFFS)),
            u_i=str(rng.choice(SUPERMODULAR_PAYOFFS)),
        )
        n_targets = 2 if multi and len(market.firms) >= 3 else 1
        ids = [f.id for f in market.firms]
        targets = tuple(int(x) for x in rng.choice(ids, size=n_targets, replace=False))
        shift = ShiftSpec(targets=targets, kind="additive_slope", epsilon=float(rng.uniform(0.05, 0.5)))
        try:
            shifted = apply_shift(market, shift)
        except PreconditionError:
            continue  # the draw reordered marginal values; redraw
        return market, shifted, shift


def shift_monotonicity_suite(trials=100, seed=0):
    """Increasing-differences shifts move matched sets the predicted way."""
    rng = np.random.default_rng(seed)
    result = SuiteResult("shift-monotonicity", trials)
    for t in range(trials):
        multi = t % 3 == 2
        market, shifted, shift = _shift_trial(rng, multi)
        report = compare(market, shifted, solver="brute", shift=shift)
        for verdict in report.verdicts:
            if verdict.applicable and verdict.passed is False:
                result.failures.append(f"trial {t}: verdict {verdict.name} failed")
        if not multi:
            delta = welfare_delta(
                market, shifted, report.solve_before.matching, report.solve_after.matching
            )
            if delta.sign_claim is not None and not delta.claim_holds:
                result.failures.append(f"trial {t}: welfare sign {delta.sign_claim} violated")
    return result


def mechanism_suite(trials=50, seed=0, n_grid=20001):
    """Payment-sum and virtual-surplus revenue agree; envelope payments are
    incentive compatible; the posted-price step allocation earns 1/4."""
    rng = np.random.default_rng(seed)
    result = SuiteResult("mechanism-identities", trials)
    u = PayoffFamily.linear()
    for t in range(trials):
        if t % 2:
            dist = DistributionSpec.uniform(rng.uniform(0, 0.3), rng.uniform(0.9, 1.6), n_grid=n_grid)
        else:
            dist = DistributionSpec.truncated_normal(
                rng.uniform(0.3, 0.9), rng.uniform(0.3, 0.8), 0.0, rng.uniform(1.2, 1.8), n_grid=n_grid
            )
        allocation = sampling.random_monotone_allocation(rng, dist.grid)
        try:
            report = payments_and_revenue(allocation, u, dist)
        except PlatmatchError as exc:  # identity or IC failures count as suite failures
            result.failures.append(f"trial {t}: {exc}")
            continue
        if not report.ic.passed:
            result.failures.append(f"trial {t}: envelope mechanism failed the IC audit: {report.ic.witness}")
    dist = DistributionSpec.uniform(0.0, 1.0, n_grid=n_grid)
    step = (dist.grid >= 0.5).astype(float)
    revenue = payments_and_revenue(step, u, dist).total_revenue
    result.details["step_revenue"] = revenue
    if abs(revenue - 0.25) > 1e-9:
        result.failures.append(f"posted-price step allocation revenue {revenue!r} is not 0.25 +- 1e-9")
    return result


def _beta_context(rng, n_firms, jump_at=None, jump_factor=1.0):
    v = np.sort(rng.uniform(0.2, 2.0, n_firms))
    while np.unique(v).size < n_firms:
        v = np.sort(rng.uniform(0.2, 2.0, n_firms))
    w = rng.uniform(0.5, 1.5, n_firms)
    w /= w.sum()
    ratio = np.maximum.accumulate(rng.uniform(0.4, 1.2, n_firms))
    if jump_at is not None:
        ratio[jump_at:] *= jump_factor
    kernel = CompetitionKernel.power(scale=1.0, eps=float(rng.uniform(0.2, 0.8)),
                                     kappa=float(rng.uniform(-0.9, -0.3)))
    ctx = BetaContext(
        firm_values=tuple(v), firm_weights=tuple(w),
        individual_value=1.0, individual_payoff=None, kernel=kernel,
    )
    return ctx, v * ratio


def beta_scaling_suite(trials=100, seed=0):
    """Threshold responses to slope-function changes: unchanged-below raises,
    unchanged-above lowers, and positive increasing scalings shrink sets."""
    rng = np.random.default_rng(seed)
    result = SuiteResult("beta-scaling", trials)
    done = 0
    attempts = 0
    while done < trials and attempts < 40 * trials:
        attempts += 1
        kind = done % 3
        n = int(rng.integers(4, 9))
        if kind == 0:  # raise strictly above the current threshold
            ctx, beta = _beta_context(rng, n)
            report0 = beta_threshold_compstat(ctx, beta, beta)
            c = report0.cutoff_before
            if c >= n:  # empty optimum: no region strictly above the threshold
                continue
            bump = 1.0 + float(rng.uniform(0.1, 0.6))
            beta_tilde = beta.copy()
            beta_tilde[c + 1:] *= bump
            if np.any(np.diff(beta_tilde / np.asarray(ctx.firm_values)) < -1e-12):
                continue
            report = beta_threshold_compstat(ctx, beta, beta_tilde)
            ok = any(v.name == "unchanged_below_threshold_raises" and v.passed for v in report.verdicts)
            claimed = any(v.name == "unchanged_below_threshold_raises" for v in report.verdicts)
            if not claimed or not ok:
                result.failures.append(f"trial {done}: raising high slopes failed to raise the threshold")
        elif kind == 1:  # raise strictly below the threshold; ratio jump keeps monotonicity
            bump = 1.0 + float(rng.uniform(0.1, 0.5))
            jump_at = int(rng.integers(1, n))
            ctx, beta = _beta_context(rng, n, jump_at=jump_at, jump_factor=2.5 * bump)
            report0 = beta_threshold_compstat(ctx, beta, beta)
            if report0.cutoff_before != jump_at:
                continue
            beta_tilde = beta.copy()
            beta_tilde[:jump_at] *= bump
            if np.any(np.diff(beta_tilde / np.asarray(ctx.firm_values)) < -1e-12):
                continue
            report = beta_threshold_compstat(ctx, beta, beta_tilde)
            ok = any(v.name == "unchanged_above_threshold_lowers" and v.passed for v in report.verdicts)
            claimed = any(v.name == "unchanged_above_threshold_lowers" for v in report.verdicts)
            if not claimed or not ok:
                result.failures.append(f"trial {done}: raising low slopes failed to lower the threshold")
        else:  # increasing positive scaling
            ctx, beta = _beta_context(rng, n)
            alpha = np.maximum.accumulate(rng.uniform(0.5, 2.0, n))
            report = beta_threshold_compstat(ctx, beta, alpha * beta)
            verdict = next(v for v in report.verdicts if v.name == "positive_scaling_shrinks")
            if not verdict.applicable or not verdict.passed:
                result.failures.append(f"trial {done}: increasing scaling grew a matching set")
        done += 1
    if done < trials:
        result.failures.append(f"only {done} of {trials} scaling trials met their premises")
    result.trials = done
    return result


def tail_inequality_suite(trials=100, seed=0):
    """Weighted tail-integral inequality on random pairs meeting the premise."""
    rng = np.random.default_rng(seed)
    result = SuiteResult("tail-inequality", trials)
    done = 0
    attempts = 0
    while done < trials and attempts < 50 * trials:
        attempts += 1
        n = int(rng.integers(12, 40))
        grid = np.sort(rng.uniform(0.0, 1.0, n))
        while np.unique(grid).size < n:
            grid = np.sort(rng.uniform(0.0, 1.0, n))
        alpha = np.maximum.accumulate(rng.uniform(0.0, 2.0, n))
        k = rng.uniform(-0.4, 1.0, n)
        k[-1] = abs(k[-1])
        report = tail_weighted_integral_check(alpha, k, grid)
        if not report.applicable:
            continue
        if not report.holds:
            result.failures.append(
                f"trial {done}: inequality failed, lhs {report.lhs!r} rhs {report.rhs!r}"
            )
        done += 1
    if done < trials:
        result.failures.append(f"only {done} of {trials} pairs met the tail premise")
    result.trials = done
    return result


def mvpd_suite(trials=50, seed=0):
    """Menu revenue identity, the two-channel worked example, the bundle-value
    condition, and ownership-merger welfare signs."""
    rng = np.random.default_rng(seed)
    result = SuiteResult("mvpd", trials)
    example = None
    try:
        example = solve_mvpd(_two_channel_example())
    except PlatmatchError as exc:
        result.failures.append(f"worked example failed to solve: {exc}")
    if example is not None:
        fees = [example.fees.get(1), example.fees.get(2)]
        if abs(fees[0] - 1.0) > 1e-9 or abs(fees[1] - 0.5) > 1e-9:
            result.failures.append(f"worked example fees {fees} are not (1.0, 0.5)")
        if abs(example.objective - 1.5) > 1e-9:
            result.failures.append(f"worked example revenue {example.objective!r} is not 1.5")

    for name, shape in (("affine", ShapeFn.linear()), ("sqrt", ShapeFn("power", rho=0.5)),
                        ("log1p", ShapeFn("log1p"))):
        verdict = check_bundle_value_condition(shape, 64, beta=0.3)
        if not verdict.passed:
            result.failures.append(f"bundle-value condition failed for {name} at {verdict.witness}")

    for t in range(trials):
        buy_lowest = t % 2 == 1
        spec = sampling.random_mvpd_spec(
            rng,
            n_channels=int(rng.integers(2, 4)),
            n_grid=31,
            affine_payoff=True if buy_lowest else bool(rng.integers(0, 2)),
            affine_bundle=True,
        )
        # identity check on a random feasible menu
        k = spec.grid.size
        menu = tuple(sorted(int(x) for x in rng.integers(0, k + 1, len(spec.channels))))
        try:
            mvpd_objective(menu_to_sizes(spec, menu), spec)
        except PlatmatchError as exc:
            result.failures.append(f"trial {t}: revenue identity failed on a random menu: {exc}")
            continue
        target = (
            min(spec.channels, key=lambda c: (c.v, c.id)).id
            if buy_lowest
            else max(spec.channels, key=lambda c: (c.v, -c.id)).id
        )
        transformed = merger_transform(spec, "vertical", channel_id=target)
        report = merger_compare(spec, transformed, "vertical", channel_id=target)
        name = "buy_lowest_viewers_better_off" if buy_lowest else "buy_highest_viewers_worse_off"
        verdict = next(v for v in report.verdicts if v.name == name)
        if not verdict.applicable:
            result.failures.append(f"trial {t}: {name} premises unexpectedly unmet: {verdict.reason}")
        elif not verdict.passed:
            result.failures.append(f"trial {t}: {name} sign prediction failed")
    return result


def _two_channel_example():
    return MvpdSpec(
        channels=[FirmType(1, 2.0), FirmType(2, 1.0)],
        channel_payoff=PayoffFamily.linear(),
        bundle_value=ShapeFn.linear(1.0, 0.0),
        viewer_dist=DistributionSpec.uniform(0.0, 1.0, n_grid=101),
        beta=0.5,
        kernel=CompetitionKernel.constant(1.0),
    )


CES_PAIRS = ((3.0, 0.5), (2.0, 0.25), (4.0, 0.6))


def ces_suite(trials=1000, seed=0):
    """Budget and spending identities, markup optimality, derived constants."""
    rng = np.random.default_rng(seed)
    result = SuiteResult("ces", trials)
    ces_ref = CesParams(3.0, 0.5)
    for name, got, want in (("kappa", ces_ref.kappa, -0.5), ("psi", ces_ref.psi, 1.5),
                            ("gamma", ces_ref.gamma, 4.0 / 27.0)):
        if abs(got - want) > 1e-12:
            result.failures.append(f"derived constant {name} is {got!r}, expected {want!r}")
    params = [CesParams(s, t) for s, t in CES_PAIRS]
    grid_mult = np.linspace(0.2, 5.0, 10_000)
    for t in range(trials):
        ces = params[t % len(params)]
        n = int(rng.integers(1, 6))
        prices = rng.uniform(0.5, 3.0, n)
        wealth = 10.0 * n
        q = ces_demand(prices, ces, wealth=wealth)
        budget_gap = abs(float(prices @ q.quantities) + q.money - wealth)
        spend_gap = abs(float(prices @ q.quantities) - q.price_index ** ces.spend_exponent)
        if budget_gap > 1e-9:
            result.failures.append(f"trial {t}: budget identity off by {budget_gap!r}")
        if spend_gap > 1e-9:
            result.failures.append(f"trial {t}: spending identity off by {spend_gap!r}")
        c = float(rng.uniform(0.3, 3.0))
        star = markup_price(c, ces.sigma)
        demand_shift = 1.0  # aggregate salience scales profit, not the argmax
        p_grid = star * grid_mult
        profit = p_grid ** (1 - ces.sigma) * demand_shift - c * p_grid ** (-ces.sigma) * demand_shift
        best_grid = float(profit.max())
        star_profit = star ** (1 - ces.sigma) - c * star ** (-ces.sigma)
        if best_grid > star_profit + 1e-8:
            result.failures.append(f"trial {t}: a grid price beat the markup rule by {best_grid - star_profit!r}")
    return result


def _subset_oracle_homogeneous(spec):
    """Independent exhaustive search over all firm subsets for one customer."""
    v = np.asarray(spec.firm_values)
    w = np.asarray(spec.firm_weights)
    phi = spec.phi_eff
    n = v.size
    masks = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(bool)
    quality = masks @ (v * w)
    surplus = bundle_utility(quality, spec.ces)
    with np.errstate(divide="ignore"):
        sal = np.where(quality > 0, salience_kernel(np.maximum(quality, 1e-300), spec.ces), 0.0)
    vals = surplus + spec.ces.gamma * sal * (masks @ (phi * w))
    k = int(np.argmax(vals))
    return float(vals[k]), masks[k]


def retail_screening_suite(trials=50, seed=0):
    """Ratio-threshold solutions equal subset enumeration; private welfare mode
    pools; included-cell acquisitions and refinements shrink sets and welfare."""
    rng = np.random.default_rng(seed)
    result = SuiteResult("retail-screening", trials)
    for t in range(trials):
        spec = sampling.random_retail_spec(rng, n_firms=int(rng.integers(8, 13)))
        sol = solve_retail(spec)
        oracle_val, oracle_mask = _subset_oracle_homogeneous(spec)
        if abs(sol.objective - oracle_val) > 1e-9:
            result.failures.append(
                f"trial {t}: threshold solution {sol.objective!r} missed subset oracle {oracle_val!r}"
            )

        private = sampling.random_retail_spec(
            rng, n_firms=10, individual_mode="private", objective_mode="welfare"
        )
        psol = solve_retail(private)
        if not psol.pooled or len(set(psol.cutoffs)) != 1:
            result.failures.append(f"trial {t}: private welfare solution did not pool")
        if psol.pointwise_monotone is False:
            result.failures.append(f"trial {t}: pointwise qualities rose with type")

        rev = sampling.random_retail_spec(
            rng, n_firms=10, individual_mode="private", objective_mode="revenue"
        )
        rsol = solve_retail(rev)
        v = np.asarray(rev.firm_values)
        w = np.asarray(rev.firm_weights)
        qualities = rsol.sets @ (v * w)
        if np.any(np.diff(qualities) < -1e-9):
            result.failures.append(f"trial {t}: revenue-mode qualities fall with type")

        # ownership and information counterfactuals on whichever cells qualify
        if sol.included_cells:
            cell = sol.included_cells[0]
            owned = acquire_cell(spec, cell)
            report = counterfactual_compare(spec, owned)
            if report.set_movement not in ("shrink", "equal"):
                result.failures.append(f"trial {t}: buying an included cell grew a set")
            if np.any(report.welfare_delta > 1e-9):
                result.failures.append(f"trial {t}: buying an included cell raised customer welfare")
            lo, hi = spec.partition.edges[cell], spec.partition.edges[cell + 1]
            refined = refine_partition(spec, cell, 0.5 * (lo + hi))
            report = counterfactual_compare(spec, refined)
            if report.set_movement not in ("shrink", "equal"):
                result.failures.append(f"trial {t}: finer information on an included cell grew a set")
            if np.any(report.welfare_delta > 1e-9):
                result.failures.append(f"trial {t}: finer information raised customer welfare")
        excluded = [
            c for c in range(spec.partition.n_cells)
            if not sol.sets[:, spec.firm_cells == c].any()
        ]
        if excluded:
            owned = acquire_cell(spec, excluded[0], require_included=False)
            report = counterfactual_compare(spec, owned)
            if report.set_movement not in ("grow", "equal"):
                result.failures.append(f"trial {t}: buying an excluded cell shrank a set")
            if np.any(report.welfare_delta < -1e-9):
                result.failures.append(f"trial {t}: buying an excluded cell lowered customer welfare")
    return result


SUITES = {
    "threshold-oracle": threshold_oracle_suite,
    "shift-monotonicity": shift_monotonicity_suite,
    "mechanism-identities": mechanism_suite,
    "beta-scaling": beta_scaling_suite,
    "tail-inequality": tail_inequality_suite,
    "mvpd": mvpd_suite,
    "ces": ces_suite,
    "retail-screening": retail_screening_suite,
}


def run_suite(name, trials, seed):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](trials=trials, seed=seed)
