import numpy as np
import pytest

from platmatch import (
    CompetitionKernel,
    FirmType,
    IndividualType,
    MarketSpec,
    Matching,
    PayoffFamily,
    ShapeFn,
    brute_force,
    foc_residual,
    iron_monotone,
    platform_objective,
    solve_horizontal,
    solve_pointwise_affine,
    solve_threshold,
)
from platmatch.core import weighted_sizes, firm_match_qualities
from platmatch.errors import SizeError, StructureError
from platmatch.sampling import random_market

from conftest import enumerate_objective, hand_objective


def make_market(firm_vs, ind_vs, u_i, u_f, kernel, firm_sigmas=None):
    firm_sigmas = firm_sigmas or [1.0] * len(firm_vs)
    mass = 1.0 / len(ind_vs)
    return MarketSpec(
        firms=[FirmType(j + 1, v, sigma=s) for j, (v, s) in enumerate(zip(firm_vs, firm_sigmas))],
        individuals=[IndividualType(i + 1, v, mass=mass) for i, v in enumerate(sorted(ind_vs))],
        individual_payoff=u_i,
        firm_payoff=u_f,
        kernel=kernel,
    )


class TestBruteForce:
    def test_instance_a(self, instance_a):
        report = brute_force(instance_a)
        best, _ = enumerate_objective(instance_a, hand_objective(instance_a))
        assert report.objective == pytest.approx(best, abs=1e-12)
        assert report.objective == pytest.approx(3.65, abs=1e-12)
        # top firm with everyone, low firm with the high type only
        assert report.matching.incidence.tolist() == [[True, True], [False, True]]

    def test_full_matching_under_constant_kernel(self, instance_a):
        market = MarketSpec(
            firms=instance_a.firms,
            individuals=instance_a.individuals,
            individual_payoff=PayoffFamily.linear(),
            firm_payoff=PayoffFamily.linear(),
            kernel=CompetitionKernel.constant(1.0),
        )
        report = brute_force(market)
        assert report.matching.incidence.all()

    def test_single_positive_pair_matches(self):
        market = make_market([1.5], [0.8], PayoffFamily.linear(), PayoffFamily.linear(),
                             CompetitionKernel.constant(1.0))
        report = brute_force(market)
        assert report.matching.incidence.all()

    def test_cell_cap(self):
        market = make_market(
            [1.0 + 0.1 * j for j in range(6)], [0.5 + 0.1 * i for i in range(4)],
            PayoffFamily.linear(), PayoffFamily.linear(), CompetitionKernel.constant(1.0),
        )
        with pytest.raises(SizeError):
            brute_force(market)

    def test_monotone_only_matches_unrestricted_on_instance_a(self, instance_a):
        assert brute_force(instance_a, monotone_only=True).objective == pytest.approx(
            brute_force(instance_a).objective, abs=1e-12
        )


class TestSolveThreshold:
    def test_instance_a_matches_oracle(self, instance_a):
        fast = solve_threshold(instance_a)
        oracle = brute_force(instance_a)
        assert fast.objective == pytest.approx(oracle.objective, abs=1e-12)
        assert fast.matching.incidence.tolist() == oracle.matching.incidence.tolist()

    def test_no_firm_side_cost_matches_everyone(self):
        market = make_market(
            [2.0, 1.0], [1.0, 2.0],
            PayoffFamily.multiplicative(ShapeFn("log1p")), PayoffFamily.zero(),
            CompetitionKernel.table([1.0, 2.0], [1.0, 0.5]),
        )
        report = solve_threshold(market)
        assert report.matching.incidence.all()

    def test_no_individual_side_agrees_with_brute_force(self):
        market = make_market(
            [2.0, 1.0], [1.0, 2.0],
            PayoffFamily.zero(), PayoffFamily.linear(),
            CompetitionKernel.table([1.0, 2.0], [1.0, 0.6]),
        )
        assert solve_threshold(market).objective == pytest.approx(
            brute_force(market).objective, abs=1e-12
        )

    def test_report_objective_is_recomputable(self, instance_a):
        report = solve_threshold(instance_a)
        assert report.objective == pytest.approx(
            platform_objective(instance_a, report.matching), abs=1e-12
        )

    def test_random_markets_match_brute_force(self):
        rng = np.random.default_rng(42)
        for _ in range(30):
            market = random_market(rng, u_i=str(rng.choice(["linear", "log", "sqrt"])),
                                   u_f=str(rng.choice(["linear", "log", "sqrt"])))
            oracle = brute_force(market)
            fast = solve_threshold(market)
            assert fast.objective == pytest.approx(oracle.objective, abs=1e-9)
            assert oracle.matching.representable
            cuts = np.asarray(oracle.matching.threshold_repr)
            assert np.all(np.diff(cuts) <= 0)  # bigger sets for higher types
            sizes = weighted_sizes(oracle.matching, market)
            assert np.all(np.diff(sizes) >= -1e-12)
            quals = firm_match_qualities(oracle.matching, market)
            by_type = quals[np.argsort(market.firm_v, kind="stable")]
            assert np.all(np.diff(by_type) >= -1e-12)

    def test_coordinate_ascent_on_oversized_grid(self):
        rng = np.random.default_rng(5)
        n_i = 12
        ind_vs = np.sort(rng.uniform(0.1, 2.0, n_i))
        masses = np.full(n_i, 1.0 / n_i)
        market = MarketSpec(
            firms=[FirmType(j + 1, v) for j, v in enumerate([2.0, 1.5, 1.0, 0.7, 0.4])],
            individuals=[IndividualType(i + 1, v, mass=m) for i, (v, m) in enumerate(zip(ind_vs, masses))],
            individual_payoff=PayoffFamily.linear(),
            firm_payoff=PayoffFamily.multiplicative(ShapeFn("log1p")),
            kernel=CompetitionKernel.power(1.0, 1.0, -0.8),
        )
        report = solve_threshold(market)  # 6^12 cutoff tuples exceeds the cap
        assert report.method == "coordinate_ascent"
        assert report.objective == pytest.approx(platform_objective(market, report.matching), abs=1e-12)
        assert report.matching.representable


class TestFocResidual:
    def test_adding_the_excluded_type_does_not_pay(self, instance_a):
        report = brute_force(instance_a)
        assert foc_residual(instance_a, report.matching, 2, direction="add") <= 0.0

    def test_marginal_membership_is_worth_keeping(self, instance_a):
        report = brute_force(instance_a)
        for firm_id in (1, 2):
            assert foc_residual(instance_a, report.matching, firm_id, direction="drop") >= -1e-6

    def test_one_cell_perturbations_strictly_lower_objective(self, instance_a):
        report = brute_force(instance_a)
        for f in range(2):
            for i in range(2):
                inc = report.matching.incidence.copy()
                inc[f, i] = ~inc[f, i]
                perturbed = Matching.from_incidence(instance_a, inc)
                assert platform_objective(instance_a, perturbed) < report.objective

    def test_full_matching_boundary(self):
        market = make_market([2.0, 1.0], [1.0, 2.0], PayoffFamily.linear(), PayoffFamily.linear(),
                             CompetitionKernel.constant(1.0))
        report = brute_force(market)
        assert report.matching.incidence.all()
        for firm_id in (1, 2):
            with pytest.raises(Exception):
                foc_residual(market, report.matching, firm_id, direction="add")
            assert foc_residual(market, report.matching, firm_id, direction="drop") >= -1e-12

    def test_linearized_form_matches_exact_for_affine_payoffs(self, instance_a):
        # with payoffs linear in quality the linearization is exact
        report = brute_force(instance_a)
        exact = foc_residual(instance_a, report.matching, 2, direction="drop")
        lin = foc_residual(instance_a, report.matching, 2, direction="drop", linearized=True)
        assert lin == pytest.approx(exact, abs=1e-6)

    def test_non_threshold_matching_rejected(self, instance_a):
        inc = np.array([[False, True], [True, False]])
        bad = Matching.from_incidence(instance_a, inc)
        with pytest.raises(StructureError):
            foc_residual(instance_a, bad, 1)

    def test_sign_conditions_at_random_optima(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            market = random_market(rng, u_f=str(rng.choice(["linear", "log", "sqrt"])))
            report = solve_threshold(market)
            for firm in market.firms:
                row = market.firm_index[firm.id]
                if report.matching.incidence[row].any():
                    assert foc_residual(market, report.matching, firm.id, "drop") >= -1e-9
                if not report.matching.incidence[row].all():
                    assert foc_residual(market, report.matching, firm.id, "add") <= 1e-9


class TestPointwiseAffine:
    def test_instance_a(self, instance_a):
        report = solve_pointwise_affine(instance_a)
        assert report.objective == pytest.approx(3.65, abs=1e-12)
        assert report.objective == pytest.approx(solve_threshold(instance_a).objective, abs=1e-10)

    def test_zero_slopes_reduce_to_individual_side(self):
        market = make_market([2.0, 1.0], [1.0, 2.0],
                             PayoffFamily.multiplicative(ShapeFn("log1p")), PayoffFamily.zero(),
                             CompetitionKernel.table([1.0, 2.0], [1.0, 0.5]))
        report = solve_pointwise_affine(market)
        assert report.matching.incidence.all()

    def test_scaling_slopes_keeps_argmax_without_individual_side(self):
        kernel = CompetitionKernel.table([1.0, 2.0], [1.0, 0.4])
        base = make_market([2.0, 1.0], [1.0, 2.0], PayoffFamily.zero(), PayoffFamily.linear(), kernel)
        scaled_payoff = PayoffFamily.multiplicative(ShapeFn.linear(3.0, 0.0))  # v * 3x
        scaled = make_market([2.0, 1.0], [1.0, 2.0], PayoffFamily.zero(), scaled_payoff, kernel)
        a = solve_pointwise_affine(base).matching.incidence
        b = solve_pointwise_affine(scaled).matching.incidence
        assert a.tolist() == b.tolist()

    def test_rejects_non_affine_firm_payoff(self, instance_a):
        market = MarketSpec(
            firms=instance_a.firms,
            individuals=instance_a.individuals,
            individual_payoff=PayoffFamily.linear(),
            firm_payoff=PayoffFamily.multiplicative(ShapeFn("log1p")),
            kernel=instance_a.kernel,
        )
        with pytest.raises(StructureError):
            solve_pointwise_affine(market)


class TestHorizontal:
    kernel = CompetitionKernel("power", scale=1.0, eps=0.5, kappa=-0.8, sigma_f_decay=0.4)

    def test_equal_saliences_collapse_to_pointwise(self, instance_a):
        thresholds, report = solve_horizontal(instance_a)
        assert report.objective == pytest.approx(solve_pointwise_affine(instance_a).objective, abs=1e-12)

    def test_nonnegative_pivot_matches_all_positive_value_firms(self):
        market = make_market(
            [2.0, 1.5], [1.0, 2.0], PayoffFamily.linear(), PayoffFamily.linear(),
            CompetitionKernel("power", scale=0.3, eps=1.0, kappa=-0.2, sigma_f_decay=0.1),
            firm_sigmas=[0.4, 0.2],
        )
        thresholds, report = solve_horizontal(market)
        for ind in market.individuals:
            if thresholds.pivot[ind.id] >= 0:
                col = market.individual_index[ind.id]
                assert report.matching.incidence[:, col].all()

    def test_negative_pivot_prefers_low_salience(self):
        market = MarketSpec(
            firms=[FirmType(1, 1.0, sigma=0.5), FirmType(2, 1.0, sigma=2.0)],
            individuals=[IndividualType(1, 0.05, mass=1.0)],
            individual_payoff=PayoffFamily.linear(),
            firm_payoff=PayoffFamily.linear(),
            kernel=CompetitionKernel("power", scale=1.0, eps=0.3, kappa=-1.4, sigma_f_decay=0.8),
        )
        thresholds, report = solve_horizontal(market)
        # oracle: all four subsets
        best, argmax = enumerate_objective(market, hand_objective(market))
        assert report.objective == pytest.approx(best, abs=1e-12)
        if thresholds.pivot[1] < 0:
            assert report.matching.incidence[:, 0].tolist() == [True, False]

    def test_matches_subset_enumeration_on_random_markets(self):
        rng = np.random.default_rng(19)
        for _ in range(10):
            n_f = int(rng.integers(2, 5))
            market = MarketSpec(
                firms=[FirmType(j + 1, float(rng.uniform(0.2, 2.0)), sigma=float(rng.uniform(0.3, 2.0)))
                       for j in range(n_f)],
                individuals=[IndividualType(1, float(rng.uniform(0.5, 1.5)), mass=1.0)],
                individual_payoff=PayoffFamily.linear(),
                firm_payoff=PayoffFamily.linear(),
                kernel=CompetitionKernel("power", scale=1.0, eps=0.5,
                                         kappa=float(rng.uniform(-1.2, -0.4)), sigma_f_decay=0.3),
            )
            _, report = solve_horizontal(market)
            best, _ = enumerate_objective(market, hand_objective(market))
            assert report.objective == pytest.approx(best, abs=1e-12)


class TestIronMonotone:
    def test_monotone_input_is_fixed_point(self):
        x = np.array([0.5, 1.0, 2.0])
        out = iron_monotone(x, np.array([0.3, 0.3, 0.4]))
        assert np.allclose(out, x)

    def test_two_point_pool(self):
        out = iron_monotone(np.array([3.0, 1.0]), np.array([0.5, 0.5]))
        assert np.allclose(out, [2.0, 2.0])

    def test_partial_pool_matches_grid_search(self):
        values = np.array([1.0, 3.0, 2.0, 2.5])
        masses = np.full(4, 0.25)
        out = iron_monotone(values, masses)
        assert np.allclose(out, [1.0, 2.5, 2.5, 2.5])
        # dynamic-programming oracle over a discretized value lattice
        lattice = np.arange(0.0, 4.0 + 1e-9, 1.0 / 16)

        def best_cost():
            # table[k][m]: cheapest cost of the first k+1 points with the
            # k-th level at lattice[m], enforcing nondecreasing levels
            table = [masses[0] * (values[0] - lattice) ** 2]
            for k in range(1, 4):
                stage = masses[k] * (values[k] - lattice) ** 2
                carry = np.minimum.accumulate(table[-1])
                table.append(stage + carry)
            return float(table[-1].min())

        dp = best_cost()
        ours = float(np.sum(masses * (values - out) ** 2))
        assert ours <= dp + 1e-12

    def test_mass_weighted_mean_preserved_per_block(self):
        rng = np.random.default_rng(23)
        values = rng.uniform(0, 3, 12)
        masses = rng.uniform(0.1, 1.0, 12)
        out = iron_monotone(values, masses)
        assert np.all(np.diff(out) >= -1e-12)
        # pooled blocks keep the weighted mean: total weighted sums agree
        assert float(np.sum(masses * out)) == pytest.approx(float(np.sum(masses * values)), abs=1e-9)
