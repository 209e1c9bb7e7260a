import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platmatch import (
    CompetitionKernel,
    FirmType,
    IndividualType,
    MarketSpec,
    Matching,
    PayoffFamily,
    ScalarFn,
    ShapeFn,
    check_supermodularity,
    find_supermodular_order,
    firm_match_quality,
    platform_objective,
    weighted_size,
)
from platmatch.errors import InputError, ValidationError

from conftest import enumerate_objective, hand_objective


def simple_market(firm_sigmas, n_inds=2, kernel=None):
    firms = [FirmType(j + 1, 2.0 - j * 0.5, sigma=s) for j, s in enumerate(firm_sigmas)]
    masses = [1.0 / n_inds] * n_inds
    inds = [IndividualType(i + 1, 1.0 + i, mass=masses[i]) for i in range(n_inds)]
    return MarketSpec(
        firms=firms,
        individuals=inds,
        individual_payoff=PayoffFamily.linear(),
        firm_payoff=PayoffFamily.linear(),
        kernel=kernel or CompetitionKernel.constant(1.0),
    )


class TestWeightedSize:
    def test_two_unit_salience_firms(self):
        market = simple_market([1.0, 1.0])
        matching = Matching.full(market)
        assert weighted_size(matching, 1, market) == 2.0

    def test_empty_row_is_zero(self):
        market = simple_market([1.0, 1.0])
        matching = Matching.empty(market)
        assert weighted_size(matching, 1, market) == 0.0

    def test_fractional_saliences_sum(self):
        market = simple_market([0.5, 0.25])
        matching = Matching.full(market)
        assert weighted_size(matching, 2, market) == pytest.approx(0.75, abs=1e-15)

    def test_unknown_id(self):
        market = simple_market([1.0])
        with pytest.raises(InputError):
            weighted_size(Matching.full(market), 99, market)

    def test_additive_over_disjoint_sets(self):
        rng = np.random.default_rng(3)
        market = simple_market(rng.uniform(0.2, 2.0, 6).tolist())
        inc = rng.uniform(size=(6, 2)) < 0.5
        split = rng.uniform(size=(6, 2)) < 0.5
        a = Matching.from_incidence(market, inc & split)
        b = Matching.from_incidence(market, inc & ~split)
        whole = Matching.from_incidence(market, inc)
        for iid in (1, 2):
            assert weighted_size(a, iid, market) + weighted_size(b, iid, market) == pytest.approx(
                weighted_size(whole, iid, market), abs=1e-12
            )


class TestFirmMatchQuality:
    def test_constant_kernel_full_matching(self):
        market = simple_market([1.0, 1.0], n_inds=3)
        assert firm_match_quality(Matching.full(market), 1, market) == pytest.approx(1.0, abs=1e-15)

    def test_empty_set(self):
        market = simple_market([1.0, 1.0])
        assert firm_match_quality(Matching.empty(market), 2, market) == 0.0

    def test_instance_a_top_firm(self, instance_a):
        # optimum: top firm with both types, second firm with the high type only
        inc = np.array([[True, True], [False, True]])
        matching = Matching.from_incidence(instance_a, inc)
        # independent scalar summation over the two grid points
        expected = 0.5 * 1.0 + 0.5 * 0.1
        assert firm_match_quality(matching, 1, instance_a) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.55)


class TestPlatformObjective:
    def test_instance_a_optimum_value(self, instance_a):
        best, argmax = enumerate_objective(instance_a, hand_objective(instance_a))
        assert best == pytest.approx(3.65, abs=1e-12)
        inc = np.array([[True, True], [False, True]])
        assert platform_objective(instance_a, Matching.from_incidence(instance_a, inc)) == pytest.approx(
            best, abs=1e-12
        )

    def test_empty_matching_normalized_to_zero(self, instance_a):
        assert platform_objective(instance_a, Matching.empty(instance_a)) == 0.0

    def test_constant_kernel_full_matching(self, instance_a):
        market = MarketSpec(
            firms=instance_a.firms,
            individuals=instance_a.individuals,
            individual_payoff=PayoffFamily.linear(),
            firm_payoff=PayoffFamily.linear(),
            kernel=CompetitionKernel.constant(1.0),
        )
        best, _ = enumerate_objective(market, hand_objective(market))
        assert best == pytest.approx(6.0, abs=1e-12)
        assert platform_objective(market, Matching.full(market)) == pytest.approx(6.0, abs=1e-12)

    def test_matches_scalar_oracle_on_random_matchings(self, instance_a):
        rng = np.random.default_rng(11)
        oracle = hand_objective(instance_a)
        for _ in range(20):
            inc = rng.uniform(size=(2, 2)) < 0.5
            matching = Matching.from_incidence(instance_a, inc)
            assert platform_objective(instance_a, matching) == pytest.approx(oracle(inc), abs=1e-12)

    def test_invariant_under_relabeling(self):
        market = simple_market([1.0, 0.5], n_inds=2, kernel=CompetitionKernel.power(1.0, 1.0, -0.7))
        relabeled = MarketSpec(
            firms=[FirmType(7, 1.5, sigma=0.5), FirmType(3, 2.0, sigma=1.0)],
            individuals=market.individuals,
            individual_payoff=market.individual_payoff,
            firm_payoff=market.firm_payoff,
            kernel=market.kernel,
        )
        inc = np.array([[True, False], [True, True]])
        swapped = inc[[1, 0], :]
        a = platform_objective(market, Matching.from_incidence(market, inc))
        b = platform_objective(relabeled, Matching.from_incidence(relabeled, swapped))
        assert a == pytest.approx(b, abs=1e-12)


class TestMatchingStructure:
    def test_reciprocity_by_transpose_round_trip(self, instance_a):
        inc = np.array([[True, False], [True, True]])
        matching = Matching.from_incidence(instance_a, inc)
        for col, ind in enumerate(instance_a.individuals):
            firms = matching.matched_firms(instance_a, ind.id)
            for k, f in enumerate(instance_a.firms):
                assert (f.id in firms) == matching.incidence.T[col, k]

    def test_threshold_classification(self, instance_a):
        inc = np.array([[True, True], [False, True]])
        matching = Matching.from_incidence(instance_a, inc)
        assert matching.representable
        assert matching.threshold_repr == (1, 0)

    def test_non_threshold_row_flagged(self, instance_a):
        inc = np.array([[False, True], [True, False]])
        matching = Matching.from_incidence(instance_a, inc)
        assert not matching.representable
        assert matching.threshold_repr is None

    def test_masses_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            MarketSpec(
                firms=[FirmType(1, 1.0)],
                individuals=[IndividualType(1, 1.0, mass=0.7)],
                individual_payoff=PayoffFamily.linear(),
                firm_payoff=PayoffFamily.linear(),
                kernel=CompetitionKernel.constant(1.0),
            )

    def test_negative_salience_rejected(self):
        with pytest.raises(ValidationError):
            MarketSpec(
                firms=[FirmType(1, 1.0, sigma=-1.0)],
                individuals=[IndividualType(1, 1.0, mass=1.0)],
                individual_payoff=PayoffFamily.linear(),
                firm_payoff=PayoffFamily.linear(),
                kernel=CompetitionKernel.constant(1.0),
            )


class TestSupermodularity:
    v = np.array([1.0, 2.0, 3.0])
    x = np.array([0.0, 1.0, 2.0])

    def test_product_passes(self):
        assert check_supermodularity(PayoffFamily.linear(), self.v, self.x).passed

    def test_negative_product_fails_with_witness(self):
        neg = PayoffFamily.multiplicative(ShapeFn.linear(-1.0, 0.0))
        verdict = check_supermodularity(neg, self.v, self.x)
        assert not verdict.passed
        v_lo, v_hi, x_lo, x_hi, gap = verdict.witness
        assert v_lo < v_hi and x_lo < x_hi and gap < 0

    def test_log_family_passes_on_grid(self):
        fam = PayoffFamily.multiplicative(ShapeFn("log1p"))
        grid_v = np.linspace(0.1, 2.0, 9)
        grid_x = np.linspace(0.0, 4.0, 9)
        assert check_supermodularity(fam, grid_v, grid_x).passed

    def test_supermodular_payoff_keeps_identity_order(self):
        found = find_supermodular_order(PayoffFamily.linear(), self.v, self.x)
        assert found.found
        assert found.order_values == (1.0, 2.0, 3.0)

    def test_decreasing_increments_reverse_order(self):
        fam = PayoffFamily.affine(ScalarFn.constant(0.0), ScalarFn("affine", c0=5.0, c1=-1.0))
        found = find_supermodular_order(fam, self.v, self.x)
        assert found.found
        assert found.order_values == (3.0, 2.0, 1.0)

    def test_sine_weights_order_verified_by_recheck(self):
        sin_table = ScalarFn.table(self.v, np.sin(self.v))
        fam = PayoffFamily.affine(ScalarFn.constant(0.0), sin_table)
        found = find_supermodular_order(fam, self.v, self.x)
        assert found.found
        order = list(found.order_indices)
        # the returned permutation must itself pass the pairwise check
        reordered = _Reindexed(fam, self.v[order])
        assert check_supermodularity(reordered, np.arange(3.0), self.x).passed
        assert found.order_values == (3.0, 1.0, 2.0)  # ascending sin(v)

    def test_conflicting_rankings_certified(self):
        fam = PayoffFamily(
            "tabulated",
            v_knots=(1.0, 2.0),
            x_knots=(0.0, 1.0, 2.0),
            table=((0.0, 1.0, 1.0), (0.0, 0.0, 1.5)),
        )
        found = find_supermodular_order(fam, np.array([1.0, 2.0]), self.x)
        assert not found.found
        assert found.conflict is not None


class _Reindexed:
    def __init__(self, fam, values):
        self.fam = fam
        self.values = np.asarray(values)

    def __call__(self, rank, x):
        rank = np.asarray(rank, int)
        return self.fam(self.values[rank], x)


@settings(max_examples=40, deadline=None)
@given(
    sigmas=st.lists(st.floats(0.0, 3.0, allow_nan=False), min_size=1, max_size=5),
    bits=st.integers(min_value=0, max_value=31),
)
def test_weighted_size_equals_masked_sum(sigmas, bits):
    market = MarketSpec(
        firms=[FirmType(j + 1, 1.0 + j, sigma=s) for j, s in enumerate(sigmas)],
        individuals=[IndividualType(1, 1.0, mass=1.0)],
        individual_payoff=PayoffFamily.linear(),
        firm_payoff=PayoffFamily.linear(),
        kernel=CompetitionKernel.constant(1.0),
    )
    mask = [(bits >> j) & 1 == 1 for j in range(len(sigmas))]
    inc = np.array(mask, dtype=bool).reshape(-1, 1)
    got = weighted_size(Matching.from_incidence(market, inc), 1, market)
    assert got == pytest.approx(sum(s for s, m in zip(sigmas, mask) if m), abs=1e-12)
