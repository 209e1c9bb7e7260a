import itertools

import numpy as np
import pytest

from platmatch import (
    CompetitionKernel,
    FirmType,
    IndividualType,
    MarketSpec,
    PayoffFamily,
)


@pytest.fixture
def instance_a():
    """Two firms v=(2,1), two viewer types v=(1,2) with mass 1/2 each,
    product payoffs on both sides, crowding kernel h(1)=1, h(2)=0.1."""
    return MarketSpec(
        firms=[FirmType(1, 2.0), FirmType(2, 1.0)],
        individuals=[IndividualType(1, 1.0, mass=0.5), IndividualType(2, 2.0, mass=0.5)],
        individual_payoff=PayoffFamily.linear(),
        firm_payoff=PayoffFamily.linear(),
        kernel=CompetitionKernel.table([1.0, 2.0], [1.0, 0.1]),
    )


def enumerate_objective(market, objective):
    """Independent exhaustive search: evaluate `objective` on every incidence
    matrix with plain python loops and return (best value, best matrices)."""
    n_f, n_i = len(market.firms), len(market.individuals)
    best = -float("inf")
    argmax = []
    for cells in itertools.product([False, True], repeat=n_f * n_i):
        inc = np.array(cells).reshape(n_f, n_i)
        val = objective(inc)
        if val > best + 1e-12:
            best, argmax = val, [inc]
        elif abs(val - best) <= 1e-12:
            argmax.append(inc)
    return best, argmax


def hand_objective(market):
    """Direct re-implementation of the objective with scalar loops, used as
    the oracle against the vectorized evaluation."""

    def value(inc):
        total = 0.0
        sizes = [
            sum(market.firms[f].sigma for f in range(len(market.firms)) if inc[f, i])
            for i in range(len(market.individuals))
        ]
        for f, firm in enumerate(market.firms):
            quality = 0.0
            for i, ind in enumerate(market.individuals):
                if inc[f, i]:
                    quality += ind.mass * float(market.kernel(sizes[i], ind.sigma, firm.sigma))
            fam = market.firm_payoff_overrides.get(firm.id, market.firm_payoff)
            total += float(fam(firm.v, quality))
        for i, ind in enumerate(market.individuals):
            total += ind.mass * float(market.individual_payoff(ind.v, sizes[i]))
        return total

    return value
