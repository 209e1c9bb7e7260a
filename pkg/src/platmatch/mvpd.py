"""Cable-distributor application: bundle menus, negotiated carriage fees,
and merger counterfactuals.

Viewers are privately informed about their taste for programming and buy
nested channel packages; fees per channel come from simultaneous bilateral
bargains that take the committed menu as given, so a breakdown only removes
that channel from existing packages.  Channels have unit salience: bundles
are counted, not weighted.

All type integrals are trapezoid sums on the viewer grid; integrals over a
channel's viewer set reuse the same node weights with a membership
indicator, which keeps every internal identity exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import (
    IcError,
    IdentityError,
    InputError,
    PreconditionError,
    SizeError,
    ValidationError,
)
from .families import PayoffFamily, ShapeFn
from .mechanism import (
    DistributionSpec,
    envelope_payoffs,
    is_regular,
    trapezoid_weights,
    virtual_value,
)

REVENUE_IDENTITY_TOL = 1e-8
MENU_CAP = 2_000_000
_CHUNK = 4096


@dataclass(frozen=True)
class MvpdSpec:
    channels: tuple
    channel_payoff: PayoffFamily
    bundle_value: ShapeFn                  # viewer value of an n-channel bundle, zero at zero
    viewer_dist: DistributionSpec
    beta: float                            # platform bargaining weight
    leverage_theta: float = 0.0            # weight on owned-channel dropout gains in fees
    owned_channel: int | None = None
    kernel: object = None                  # h over integer bundle sizes
    channel_payoff_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        errors = []
        if not self.channels:
            errors.append("need at least one channel")
        ids = [c.id for c in self.channels]
        if len(set(ids)) != len(ids):
            errors.append("channel ids must be unique")
        if any(abs(c.sigma - 1.0) > 1e-12 for c in self.channels):
            errors.append("channels must have unit salience; bundles are counted")
        if not 0.0 <= self.beta <= 1.0:
            errors.append(f"bargaining weight must lie in [0, 1], got {self.beta}")
        if not 0.0 <= self.leverage_theta <= 1.0:
            errors.append(f"leverage weight must lie in [0, 1], got {self.leverage_theta}")
        if abs(float(self.bundle_value(0.0))) > 1e-12:
            errors.append("bundle value must be 0 at the empty bundle")
        if self.kernel is None:
            errors.append("a kernel over bundle sizes is required")
        if self.owned_channel is not None and self.owned_channel not in ids:
            errors.append(f"owned channel {self.owned_channel} is not a channel id")
        if errors:
            raise ValidationError(errors)

    @cached_property
    def by_rank(self):
        """Channel indices sorted descending by (v, id): rank 1 is the top channel."""
        return tuple(sorted(range(len(self.channels)),
                            key=lambda k: (-self.channels[k].v, self.channels[k].id)))

    @cached_property
    def rank_of_id(self):
        return {self.channels[k].id: r + 1 for r, k in enumerate(self.by_rank)}

    @cached_property
    def grid(self):
        return self.viewer_dist.grid

    @cached_property
    def node_weights(self):
        return trapezoid_weights(self.grid) * self.viewer_dist.pdf(self.grid)

    @cached_property
    def phi(self):
        return virtual_value(self.viewer_dist, self.grid)

    @cached_property
    def regular(self):
        return is_regular(self.viewer_dist)

    @cached_property
    def g_table(self):
        return np.asarray(self.bundle_value(np.arange(len(self.channels) + 1)), float)

    @cached_property
    def h_table(self):
        n = np.arange(len(self.channels) + 1)
        return np.asarray(self.kernel(np.maximum(n, 1)), float)  # size 0 never reached

    def payoff_of(self, channel_id):
        return self.channel_payoff_overrides.get(channel_id, self.channel_payoff)

    def rank_values(self):
        """Channel v by rank, index 0 = rank 1."""
        return np.array([self.channels[k].v for k in self.by_rank])


def _require_sizes(spec, sizes):
    sizes = np.asarray(sizes, int)
    if sizes.shape != spec.grid.shape:
        raise InputError("bundle sizes must be defined on the viewer grid")
    if sizes.min() < 0 or sizes.max() > len(spec.channels):
        raise InputError("bundle sizes must lie in [0, number of channels]")
    return sizes


def menu_to_sizes(spec, cutoff_indices):
    """Bundle size per grid node from per-rank cutoff indices (grid size = never)."""
    cuts = np.asarray(cutoff_indices, int)
    if cuts.size != len(spec.channels) or np.any(np.diff(cuts) < 0):
        raise InputError("menu needs one nondecreasing cutoff index per rank")
    k = np.arange(spec.grid.size)
    return (k[None, :] >= cuts[:, None]).sum(axis=0)


def channel_qualities(sizes, spec):
    """Kernel-weighted viewer mass per channel, ordered as spec.channels."""
    sizes = _require_sizes(spec, sizes)
    h = spec.h_table[sizes]
    out = np.empty(len(spec.channels))
    for k, ch in enumerate(spec.channels):
        r = spec.rank_of_id[ch.id]
        out[k] = float(np.sum(spec.node_weights * h * (sizes >= r)))
    return out


def viewer_revenue(sizes, spec):
    """Virtual-value-weighted bundle values over the viewer grid."""
    sizes = _require_sizes(spec, sizes)
    if np.any(np.diff(sizes) < 0):
        raise IcError("bundle sizes must be nondecreasing in viewer type")
    return float(np.sum(spec.node_weights * spec.phi * spec.g_table[sizes]))


def dropout_delta(sizes, channel_id, spec):
    """Viewer-revenue change if the channel is dropped from every package."""
    sizes = _require_sizes(spec, sizes)
    if channel_id not in spec.rank_of_id:
        raise InputError(f"unknown channel id {channel_id}")
    r = spec.rank_of_id[channel_id]
    member = sizes >= r
    diff = spec.g_table[np.maximum(sizes - 1, 0)] - spec.g_table[sizes]
    return float(np.sum(spec.node_weights * spec.phi * diff * member))


def _leverage_term(sizes, spec, dropped_id):
    """Owned-channel quality gain when dropped_id leaves all packages."""
    c = spec.owned_channel
    rc = spec.rank_of_id[c]
    rd = spec.rank_of_id[dropped_id]
    member_c = sizes >= rc
    reduced = sizes - (sizes >= rd)
    q_without = float(np.sum(spec.node_weights * spec.h_table[np.maximum(reduced, 1)] * member_c))
    q_with = float(np.sum(spec.node_weights * spec.h_table[sizes] * member_c))
    fam = spec.payoff_of(c)
    v_c = spec.channels[[ch.id for ch in spec.channels].index(c)].v
    return float(fam(v_c, q_without) - fam(v_c, q_with))


def nash_fee(sizes, channel_id, spec):
    """Negotiated carriage fee at the committed menu.

    beta 1 gives the full channel payoff; beta 0 gives the platform's
    dropout loss.  With an owned channel, the fee nets out the
    leverage-weighted gain the owner's channel would enjoy on breakdown.
    """
    sizes = _require_sizes(spec, sizes)
    if channel_id not in spec.rank_of_id:
        raise InputError(f"unknown channel id {channel_id}")
    if spec.owned_channel == channel_id:
        raise InputError("the owned channel has no negotiated fee")
    k = [c.id for c in spec.channels].index(channel_id)
    quality = channel_qualities(sizes, spec)[k]
    fam = spec.payoff_of(channel_id)
    base = spec.beta * float(fam(spec.channels[k].v, quality))
    outside = dropout_delta(sizes, channel_id, spec)
    if spec.owned_channel is not None and spec.leverage_theta:
        outside += spec.leverage_theta * _leverage_term(sizes, spec, channel_id)
    return base + (1.0 - spec.beta) * outside


def mvpd_objective(sizes, spec):
    """Total distributor revenue at a menu (fee-weighted channel payoffs plus
    the adjusted viewer-revenue integrand), cross-checked against the fee sum."""
    sizes = _require_sizes(spec, sizes)
    qualities = channel_qualities(sizes, spec)
    firm_part = 0.0
    for k, ch in enumerate(spec.channels):
        firm_part += spec.beta * float(spec.payoff_of(ch.id)(ch.v, qualities[k]))
    g = spec.g_table[sizes]
    g_down = spec.g_table[np.maximum(sizes - 1, 0)]
    integrand = g + (1.0 - spec.beta) * sizes * (g_down - g)
    value = firm_part + float(np.sum(spec.node_weights * spec.phi * integrand))

    fee_total = sum(nash_fee(sizes, ch.id, spec) for ch in spec.channels)
    cross = fee_total + viewer_revenue(sizes, spec)
    if abs(value - cross) > REVENUE_IDENTITY_TOL:
        raise IdentityError(
            f"menu revenue {value!r} disagrees with fees plus viewer revenue {cross!r}"
        )
    return value


def owned_channel_objective(sizes, spec, theta=None):
    """Distributor revenue when one channel is owned outright.

    The owned channel's payoff enters with full weight, its own dropout term
    leaves the fee algebra, and breakdown negotiations credit the
    leverage-weighted gain to the owned channel's viewership.
    """
    if spec.owned_channel is None:
        raise PreconditionError("an owned channel is required")
    sizes = _require_sizes(spec, sizes)
    theta = spec.leverage_theta if theta is None else theta
    c = spec.owned_channel
    qualities = channel_qualities(sizes, spec)
    ids = [ch.id for ch in spec.channels]
    kc = ids.index(c)

    value = float(spec.payoff_of(c)(spec.channels[kc].v, qualities[kc]))
    for k, ch in enumerate(spec.channels):
        if ch.id == c:
            continue
        value += spec.beta * float(spec.payoff_of(ch.id)(ch.v, qualities[k]))
    g = spec.g_table[sizes]
    g_down = spec.g_table[np.maximum(sizes - 1, 0)]
    integrand = g + (1.0 - spec.beta) * sizes * (g_down - g)
    value += float(np.sum(spec.node_weights * spec.phi * integrand))
    value -= (1.0 - spec.beta) * dropout_delta(sizes, c, spec)
    if theta:
        lever = sum(_leverage_term(sizes, spec, ch.id) for ch in spec.channels if ch.id != c)
        value += (1.0 - spec.beta) * theta * lever
    return value


@dataclass(frozen=True)
class BundleConditionVerdict:
    passed: bool
    witness: int | None = None  # first size where the adjusted value decreases


def check_bundle_value_condition(bundle_value, x_max, beta):
    """Whether g(x) + (1-beta)*x*(g(x-1) - g(x)) is increasing for x >= 1.

    This is what makes the adjusted viewer integrand supermodular; concave g
    always passes, convex g may not.
    """
    x = np.arange(1, int(x_max) + 1, dtype=float)
    g = np.asarray(bundle_value(x), float)
    g_down = np.asarray(bundle_value(x - 1), float)
    expr = g + (1.0 - beta) * x * (g_down - g)
    drops = np.flatnonzero(np.diff(expr) < -1e-12)
    if drops.size:
        return BundleConditionVerdict(False, int(x[drops[0]]))
    return BundleConditionVerdict(True)


@dataclass(frozen=True, eq=False)
class MvpdOutcome:
    menu_cutoff_indices: tuple
    menu_cutoff_types: tuple
    sizes: np.ndarray
    fees: dict
    payments: np.ndarray
    envelope: np.ndarray
    viewer_revenue: float
    fee_total: float
    objective: float
    searched: int


def _check_solve_preconditions(spec):
    n = len(spec.channels)
    g = spec.g_table
    if np.any(np.diff(g) <= 1e-15):
        raise PreconditionError("bundle value must be strictly increasing in bundle size")
    if n >= 2 and np.any(np.diff(np.diff(g)) > 1e-12):
        raise PreconditionError("bundle value must be concave on bundle sizes")
    qgrid = np.linspace(0.0, max(spec.h_table.max(), 1e-9), 9)
    vs = spec.rank_values()
    fams = [spec.payoff_of(spec.channels[k].id) for k in spec.by_rank]
    vals = np.stack([np.asarray(f(v, qgrid), float) for f, v in zip(fams, vs)])
    inc = np.diff(vals, axis=1)
    if n >= 2 and np.any(np.diff(inc[::-1], axis=0) < -1e-12):
        raise PreconditionError("channel payoff profile must be supermodular in (type, quality)")
    if np.any(np.diff(inc, axis=1) > 1e-9):
        raise PreconditionError("channel payoffs must be concave in match quality")


def solve_mvpd(spec):
    """Optimal nested menu by exhaustive enumeration of nondecreasing cutoffs.

    Cutoff index K (one past the grid) means a channel is in nobody's
    package.  Dispatches to the ownership objective when a channel is owned.
    Ties keep the first menu in lexicographic cutoff order.
    """
    _check_solve_preconditions(spec)
    n = len(spec.channels)
    k_grid = spec.grid.size
    n_menus = _n_menus(k_grid + 1, n)
    if n_menus > MENU_CAP:
        raise SizeError(f"{n_menus} menus exceeds the {MENU_CAP} cap; coarsen the viewer grid")

    best_val = -np.inf
    best_menu = None
    buffer = []
    for menu in itertools.combinations_with_replacement(range(k_grid + 1), n):
        buffer.append(menu)
        if len(buffer) == _CHUNK:
            best_val, best_menu = _scan_chunk(spec, buffer, best_val, best_menu)
            buffer = []
    if buffer:
        best_val, best_menu = _scan_chunk(spec, buffer, best_val, best_menu)
    sizes = menu_to_sizes(spec, best_menu)
    return _outcome(spec, best_menu, sizes, n_menus)


def _scan_chunk(spec, menus, best_val, best_menu):
    vals = _objective_chunk(spec, np.asarray(menus, int))
    top = float(vals.max())
    if top > best_val:
        return top, menus[int(np.argmax(vals))]
    return best_val, best_menu


def _objective_chunk(spec, cuts):
    """Menu objectives for a (B, ranks) block of nondecreasing cutoff indices."""
    k = np.arange(spec.grid.size)
    sizes = (k[None, None, :] >= cuts[:, :, None]).sum(axis=1)  # (B, K)
    w = spec.node_weights
    beta = spec.beta
    g = spec.g_table[sizes]
    g_down = spec.g_table[np.maximum(sizes - 1, 0)]
    integrand = g + (1.0 - beta) * sizes * (g_down - g)
    vals = (w[None, :] * spec.phi[None, :] * integrand).sum(axis=1)

    h = spec.h_table[sizes]
    rank_v = spec.rank_values()
    owned = spec.owned_channel
    for r in range(1, len(spec.channels) + 1):
        ch = spec.channels[spec.by_rank[r - 1]]
        member = sizes >= r
        quality = (w[None, :] * h * member).sum(axis=1)
        payoff = np.asarray(spec.payoff_of(ch.id)(rank_v[r - 1], quality), float)
        if owned is not None and ch.id == owned:
            vals += payoff
        else:
            vals += beta * payoff
    if owned is None:
        return vals

    rc = spec.rank_of_id[owned]
    member_c = sizes >= rc
    vals -= (1.0 - beta) * (
        w[None, :] * spec.phi[None, :] * (g_down - g) * member_c
    ).sum(axis=1)
    theta = spec.leverage_theta
    if theta:
        ids = [c.id for c in spec.channels]
        kc = ids.index(owned)
        fam = spec.payoff_of(owned)
        v_c = spec.channels[kc].v
        q_with = (w[None, :] * h * member_c).sum(axis=1)
        for r in range(1, len(spec.channels) + 1):
            if r == rc:
                continue
            reduced = sizes - (sizes >= r)
            h_red = spec.h_table[np.maximum(reduced, 1)]
            q_without = (w[None, :] * h_red * member_c).sum(axis=1)
            vals += (1.0 - beta) * theta * (
                np.asarray(fam(v_c, q_without), float) - np.asarray(fam(v_c, q_with), float)
            )
    return vals


def _n_menus(options, n):
    from math import comb

    return comb(options + n - 1, n)


def _outcome(spec, menu, sizes, searched):
    grid = spec.grid
    types = tuple(float(grid[c]) if c < grid.size else np.inf for c in menu)
    fees = {}
    for ch in spec.channels:
        if ch.id == spec.owned_channel:
            continue
        fees[ch.id] = nash_fee(sizes, ch.id, spec)
    fee_total = float(sum(fees.values()))
    rev = viewer_revenue(sizes, spec)
    if spec.owned_channel is None:
        objective = mvpd_objective(sizes, spec)
    else:
        objective = owned_channel_objective(sizes, spec)
    allocation = spec.g_table[sizes].astype(float)
    u = PayoffFamily.linear()
    envelope = envelope_payoffs(allocation, u, spec.viewer_dist, v_low_payoff=0.0)
    payments = np.asarray(u(grid, allocation), float) - envelope
    return MvpdOutcome(
        tuple(int(c) for c in menu), types, sizes, fees, payments, envelope,
        rev, fee_total, objective, searched,
    )


# ---------------------------------------------------------------------------
# mergers


def merger_transform(spec, kind, channel_ids=(), synergy=0.0, channel_id=None):
    """Horizontal: cost synergies raise the merged channels' margins, an
    additive-slope change.  Vertical: the distributor buys a channel and the
    objective switches to the ownership form."""
    if kind == "horizontal":
        if not channel_ids:
            raise InputError("horizontal merger needs channel ids")
        if synergy < 0:
            raise InputError("synergy must be >= 0")
        overrides = dict(spec.channel_payoff_overrides)
        for cid in channel_ids:
            if cid not in spec.rank_of_id:
                raise InputError(f"unknown channel id {cid}")
            overrides[cid] = spec.payoff_of(cid).with_slope_bonus(synergy)
        return replace(spec, channel_payoff_overrides=overrides)
    if kind == "vertical":
        if channel_id is None or channel_id not in spec.rank_of_id:
            raise InputError("vertical merger needs a valid channel id")
        return replace(spec, owned_channel=channel_id)
    raise InputError(f"unknown merger kind {kind!r}")


@dataclass(frozen=True, eq=False)
class MergerReport:
    outcome_before: MvpdOutcome
    outcome_after: MvpdOutcome
    bundle_movement: str           # "grow", "shrink", "equal", "mixed"
    welfare_delta: np.ndarray
    verdicts: tuple


def merger_compare(spec, transformed, kind, channel_ids=(), channel_id=None):
    """Solve before and after a merger and attach the applicable sign verdicts."""
    from .compstat import Verdict

    before = solve_mvpd(spec)
    after = solve_mvpd(transformed)
    d = after.sizes - before.sizes
    grow = bool(np.all(d >= 0))
    shrink = bool(np.all(d <= 0))
    movement = "equal" if (grow and shrink) else "grow" if grow else "shrink" if shrink else "mixed"
    delta = after.envelope - before.envelope

    verdicts = []
    affine = all(spec.payoff_of(c.id).is_affine_in_x for c in spec.channels)
    g_affine = spec.bundle_value.kind == "affine" and abs(float(spec.bundle_value(0.0))) < 1e-12
    no_exclusion = bool(before.sizes.min() >= 1)
    ranks = sorted(spec.rank_of_id.values())
    if kind == "horizontal":
        target_ranks = sorted(spec.rank_of_id[c] for c in channel_ids)
        lowest_pair = target_ranks == ranks[-len(target_ranks):]
        highest_pair = target_ranks == ranks[: len(target_ranks)]
        in_every_bundle = bool(np.all(before.sizes >= max(target_ranks)))
        verdicts.append(Verdict(
            "lowest_merger_bundles_grow", affine and lowest_pair,
            bool(np.all(d >= 0)) if (affine and lowest_pair) else None,
            "" if (affine and lowest_pair) else "needs affine channel payoffs and the lowest-type channels",
        ))
        applicable = highest_pair and in_every_bundle and no_exclusion
        verdicts.append(Verdict(
            "highest_merger_bundles_shrink", applicable,
            bool(np.all(d <= 0)) if applicable else None,
            "" if applicable else "needs the top channels to sit in every pre-merger package",
        ))
    else:
        rank_c = spec.rank_of_id[channel_id]
        highest = rank_c == 1
        lowest = rank_c == len(spec.channels)
        theta_zero = transformed.leverage_theta == 0.0
        applicable = highest and theta_zero and g_affine and no_exclusion
        verdicts.append(Verdict(
            "buy_highest_viewers_worse_off", applicable,
            bool(np.all(delta <= 1e-9)) if applicable else None,
            "" if applicable else "needs theta 0, affine bundle value, top channel, no exclusion",
        ))
        applicable = lowest and theta_zero and g_affine and affine and no_exclusion
        verdicts.append(Verdict(
            "buy_lowest_viewers_better_off", applicable,
            bool(np.all(delta >= -1e-9)) if applicable else None,
            "" if applicable else "needs theta 0, affine payoffs and bundle value, bottom channel",
        ))
    return MergerReport(before, after, movement, delta, tuple(verdicts))
