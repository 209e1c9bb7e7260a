import numpy as np
import pytest

from platmatch import (
    CesParams,
    DistributionSpec,
    Partition,
    RetailSpec,
    acquire_cell,
    ces_demand,
    counterfactual_compare,
    markup_price,
    refine_partition,
    retail_objective,
    salience_kernel,
    solve_retail,
)
from platmatch.errors import InputError, PreconditionError, ValidationError
from platmatch.monopcomp import bundle_utility, customer_welfare, discretize_firms
from platmatch.sampling import random_retail_spec


class TestCesParams:
    def test_reference_constants(self):
        ces = CesParams(3.0, 0.5)
        assert ces.kappa == pytest.approx(-0.5, abs=1e-12)
        assert ces.psi == pytest.approx(1.5, abs=1e-12)
        assert ces.gamma == pytest.approx(4.0 / 27.0, abs=1e-12)

    def test_constraint_named_on_failure(self):
        with pytest.raises(ValidationError) as err:
            CesParams(2.0, 0.6)  # sigma*(1-theta) = 0.8
        assert "sigma*(1-theta)" in str(err.value)

    def test_derived_ranges_across_admissible_draws(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            sigma = float(rng.uniform(1.2, 6.0))
            theta = float(rng.uniform(0.05, 0.95))
            if sigma * (1 - theta) <= 1:
                continue
            ces = CesParams(sigma, theta)
            assert -1 < ces.kappa < 0
            assert ces.psi > 0
            assert ces.gamma > 0


class TestCesDemand:
    def test_single_unit_price(self):
        q = ces_demand([1.0], CesParams(3.0, 0.5), wealth=5.0)
        assert q.price_index == pytest.approx(1.0, abs=1e-12)
        assert q.spending == pytest.approx(1.0, abs=1e-12)
        assert q.quantities[0] == pytest.approx(1.0, abs=1e-12)

    def test_two_unit_prices_price_index(self):
        q = ces_demand([1.0, 1.0], CesParams(3.0, 0.5), wealth=5.0)
        assert q.price_index == pytest.approx(2 ** -0.5, abs=1e-12)
        assert q.spending == pytest.approx(2 ** 0.5, abs=1e-12)
        assert np.allclose(q.quantities, 2 ** -0.5, atol=1e-12)

    def test_identities_on_random_prices(self):
        rng = np.random.default_rng(7)
        for sigma, theta in ((3.0, 0.5), (2.0, 0.25), (4.0, 0.6)):
            ces = CesParams(sigma, theta)
            for _ in range(200):
                prices = rng.uniform(0.5, 3.0, int(rng.integers(1, 6)))
                wealth = 10.0 * prices.size
                q = ces_demand(prices, ces, wealth=wealth)
                spend = float(prices @ q.quantities)
                assert spend + q.money == pytest.approx(wealth, abs=1e-9)
                assert spend == pytest.approx(q.price_index ** ces.spend_exponent, abs=1e-9)

    def test_wealth_shortfall_rejected(self):
        with pytest.raises(InputError):
            ces_demand([0.2, 0.2], CesParams(3.0, 0.5), wealth=0.1)


class TestMarkupPrice:
    def test_reference_values(self):
        assert markup_price(2.0, 3.0) == pytest.approx(3.0, abs=1e-15)
        assert markup_price(1.0, 2.0) == pytest.approx(2.0, abs=1e-15)

    def test_beats_grid_search(self):
        rng = np.random.default_rng(9)
        grid_mult = np.linspace(0.2, 5.0, 10_000)
        for _ in range(50):
            sigma = float(rng.uniform(1.5, 5.0))
            c = float(rng.uniform(0.2, 3.0))
            star = markup_price(c, sigma)
            prices = star * grid_mult
            profit = prices ** (1 - sigma) - c * prices ** (-sigma)
            assert float(profit.max()) <= star ** (1 - sigma) - c * star ** (-sigma) + 1e-8

    def test_strictly_better_than_nearby_prices(self):
        star = markup_price(1.0, 3.0)
        profit = lambda p: p ** -2 - p ** -3
        assert profit(star) > profit(star * 1.01)
        assert profit(star) > profit(star * 0.99)


class TestSalienceKernel:
    ces = CesParams(3.0, 0.5)

    def test_reference_points(self):
        assert salience_kernel(1.0, self.ces) == pytest.approx(1.5, abs=1e-12)
        assert salience_kernel(4.0, self.ces) == pytest.approx(0.75, abs=1e-12)

    def test_type_scaling(self):
        assert salience_kernel(4.0, self.ces, v_i=2.0) == pytest.approx(1.5, abs=1e-12)

    def test_nonpositive_quality_rejected(self):
        with pytest.raises(InputError):
            salience_kernel(0.0, self.ces)

    def test_consistent_with_price_index_route(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            v = rng.uniform(0.2, 2.0, int(rng.integers(1, 6)))
            costs = v ** (1.0 / (1.0 - self.ces.sigma))
            prices = np.array([markup_price(c, self.ces.sigma) for c in costs])
            p_index = float(np.sum(prices ** (1 - self.ces.sigma)) ** (1 / (1 - self.ces.sigma)))
            direct = p_index ** self.ces.demand_exponent
            assert salience_kernel(float(v.sum()), self.ces) == pytest.approx(direct, abs=1e-10)

    def test_firm_profit_aggregation_matches_demand_route(self):
        # profit from posted markup prices equals gamma * v * (salience mass)
        rng = np.random.default_rng(5)
        ces = self.ces
        for _ in range(20):
            v_own = float(rng.uniform(0.3, 2.0))
            cost = v_own ** (1.0 / (1.0 - ces.sigma))
            price = markup_price(cost, ces.sigma)
            h_mass = float(rng.uniform(0.2, 3.0))  # aggregated customer salience
            demand = price ** (-ces.sigma) * h_mass
            profit = (price - cost) * demand
            assert profit == pytest.approx(ces.gamma * v_own * h_mass, abs=1e-9)


def subset_oracle(spec):
    """Exhaustive independent search over every firm subset (one customer)."""
    v = np.asarray(spec.firm_values)
    w = np.asarray(spec.firm_weights)
    phi = spec.phi_eff
    n = v.size
    best, best_mask = -np.inf, None
    for mask_bits in range(1 << n):
        mask = [(mask_bits >> j) & 1 == 1 for j in range(n)]
        quality = float(sum(vi * wi for vi, wi, m in zip(v, w, mask) if m))
        value = bundle_utility(quality, spec.ces)
        if quality > 0:
            value += spec.ces.gamma * salience_kernel(quality, spec.ces) * float(
                sum(p * wi for p, wi, m in zip(phi, w, mask) if m)
            )
        if value > best:
            best, best_mask = value, mask
    return best, best_mask


class TestSolveRetail:
    def test_matches_subset_enumeration(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            spec = random_retail_spec(rng, n_firms=12)
            sol = solve_retail(spec)
            best, _ = subset_oracle(spec)
            assert sol.objective == pytest.approx(best, abs=1e-9)

    def test_retail_objective_agrees_with_solution_value(self):
        rng = np.random.default_rng(13)
        spec = random_retail_spec(rng, n_firms=10)
        sol = solve_retail(spec)
        assert retail_objective(sol.sets, spec) == pytest.approx(sol.objective, abs=1e-10)

    def test_empty_allocation_is_zero(self):
        rng = np.random.default_rng(15)
        spec = random_retail_spec(rng, n_firms=8)
        sets = np.zeros((1, 8), dtype=bool)
        assert retail_objective(sets, spec) == 0.0

    def test_private_welfare_mode_pools(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            spec = random_retail_spec(rng, n_firms=10, individual_mode="private",
                                      objective_mode="welfare")
            sol = solve_retail(spec)
            assert sol.pooled
            assert len(set(sol.cutoffs)) == 1
            assert (sol.sets == sol.sets[0]).all()
            assert sol.pointwise_monotone  # unconstrained optimum falls with type

    def test_revenue_mode_quality_monotone(self):
        rng = np.random.default_rng(19)
        for _ in range(5):
            spec = random_retail_spec(rng, n_firms=10, individual_mode="private",
                                      objective_mode="revenue")
            sol = solve_retail(spec)
            v = np.asarray(spec.firm_values)
            w = np.asarray(spec.firm_weights)
            qualities = sol.sets @ (v * w)
            assert np.all(np.diff(qualities) >= -1e-9)

    def test_observed_mode_shares_the_argmax(self):
        rng = np.random.default_rng(21)
        spec = random_retail_spec(rng, n_firms=9, individual_mode="observed",
                                  objective_mode="welfare")
        sol = solve_retail(spec)
        assert (sol.sets == sol.sets[0]).all()

    def test_two_evaluation_paths_for_owned_everything(self):
        # when every cell is owned the effective values are the true values;
        # compare the formula evaluation against a term-by-term scalar sum
        dist = DistributionSpec.uniform(0.2, 1.2, n_grid=51)
        values, weights = discretize_firms(dist, 8)
        spec = RetailSpec(
            firm_values=tuple(values), firm_weights=tuple(weights), firm_dist=dist,
            partition=Partition((0.2, 1.2)), ces=CesParams(3.0, 0.5),
            owned_cells=frozenset({0}),
        )
        assert np.allclose(spec.phi_eff, values, atol=1e-12)
        sol = solve_retail(spec)
        mask = sol.sets[0]
        quality = float(sum(v * w for v, w, m in zip(values, weights, mask) if m))
        by_hand = bundle_utility(quality, spec.ces) + spec.ces.gamma * salience_kernel(
            quality, spec.ces
        ) * float(sum(v * w for v, w, m in zip(values, weights, mask) if m))
        assert sol.objective == pytest.approx(by_hand, abs=1e-10)


class TestCounterfactuals:
    def included_spec(self, seed=23):
        rng = np.random.default_rng(seed)
        for _ in range(50):
            spec = random_retail_spec(rng, n_firms=10, n_cells=2)
            sol = solve_retail(spec)
            if sol.included_cells:
                return spec, sol
        pytest.skip("no included cell drawn")

    def test_acquiring_included_cell_shrinks_and_hurts(self):
        spec, sol = self.included_spec()
        owned = acquire_cell(spec, sol.included_cells[0])
        report = counterfactual_compare(spec, owned)
        assert report.set_movement in ("shrink", "equal")
        assert np.all(report.welfare_delta <= 1e-9)

    def test_acquiring_partial_cell_blocked(self):
        # single uniform cell on [0.1, 1.1]: the cut lands strictly inside it
        dist = DistributionSpec.uniform(0.1, 1.1, n_grid=101)
        values, weights = discretize_firms(dist, 12)
        spec = RetailSpec(
            firm_values=tuple(values), firm_weights=tuple(weights), firm_dist=dist,
            partition=Partition((0.1, 1.1)), ces=CesParams(3.0, 0.5),
        )
        sol = solve_retail(spec)
        matched = sol.sets[0]
        assert matched.any() and not matched.all()  # genuinely partial
        with pytest.raises(PreconditionError):
            acquire_cell(spec, 0)

    def test_acquiring_excluded_cell_grows_and_helps(self):
        # firms cluster far below their cell top, so the whole bottom cell
        # carries deeply negative screened values and drops out
        dist = DistributionSpec.uniform(0.1, 1.1, n_grid=101)
        values = np.concatenate([np.linspace(0.12, 0.2, 4), np.linspace(0.85, 1.05, 8)])
        weights = np.full(values.size, 1.0 / values.size)
        spec = RetailSpec(
            firm_values=tuple(values), firm_weights=tuple(weights), firm_dist=dist,
            partition=Partition((0.1, 0.8, 1.1)), ces=CesParams(3.0, 0.5),
        )
        sol = solve_retail(spec)
        assert not sol.sets[:, spec.firm_cells == 0].any()
        owned = acquire_cell(spec, 0, require_included=False)
        report = counterfactual_compare(spec, owned)
        assert report.set_movement == "grow"
        assert np.all(report.welfare_delta >= -1e-9)

    def test_refining_included_cell_shrinks_and_hurts(self):
        spec, sol = self.included_spec(seed=37)
        cell = sol.included_cells[0]
        lo, hi = spec.partition.edges[cell], spec.partition.edges[cell + 1]
        refined = refine_partition(spec, cell, 0.5 * (lo + hi))
        assert refined.partition.n_cells == spec.partition.n_cells + 1
        report = counterfactual_compare(spec, refined)
        assert report.set_movement in ("shrink", "equal")
        assert np.all(report.welfare_delta <= 1e-9)

    def test_refine_at_cell_top_is_identity(self):
        rng = np.random.default_rng(41)
        spec = random_retail_spec(rng, n_firms=8)
        hi = spec.partition.edges[1]
        assert refine_partition(spec, 0, hi) is spec

    def test_refine_outside_cell_rejected(self):
        rng = np.random.default_rng(43)
        spec = random_retail_spec(rng, n_firms=8, n_cells=2)
        with pytest.raises(InputError):
            refine_partition(spec, 0, spec.partition.edges[2])

    def test_private_welfare_counterfactual_uses_envelope(self):
        rng = np.random.default_rng(47)
        for _ in range(60):
            spec = random_retail_spec(rng, n_firms=10, individual_mode="private",
                                      objective_mode="welfare")
            sol = solve_retail(spec)
            if not sol.included_cells:
                continue
            owned = acquire_cell(spec, sol.included_cells[0])
            report = counterfactual_compare(spec, owned)
            assert report.welfare_before[0] == pytest.approx(0.0, abs=1e-12)
            assert np.all(report.welfare_delta <= 1e-9)
            return
        pytest.skip("no included cell drawn")
