"""Platform-optimal many-to-many matching with within-group competition effects.

Solvers for platform-designed matchings, a private-information mechanism
layer, comparative-statics counterfactuals, and two applications: cable
bundle menus with negotiated carriage fees, and a retail platform screening
monopolistically competitive firms.
"""

__version__ = "0.1.0"

from .core import (
    FirmType,
    IndividualType,
    MarketSpec,
    Matching,
    check_supermodularity,
    find_supermodular_order,
    firm_match_quality,
    platform_objective,
    weighted_size,
)
from .compstat import (
    BetaContext,
    ShiftSpec,
    apply_shift,
    beta_threshold_compstat,
    compare,
    tail_weighted_integral_check,
    welfare_delta,
)
from .families import CompetitionKernel, PayoffFamily, ScalarFn, ShapeFn
from .mechanism import (
    DistributionSpec,
    Partition,
    audit_ic,
    cell_virtual_value,
    envelope_payoffs,
    is_regular,
    payments_and_revenue,
    virtual_value,
    welfare_envelope_preconditions,
)
from .monopcomp import (
    CesParams,
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
from .mvpd import (
    MvpdSpec,
    check_bundle_value_condition,
    dropout_delta,
    merger_compare,
    merger_transform,
    mvpd_objective,
    nash_fee,
    owned_channel_objective,
    solve_mvpd,
    viewer_revenue,
)
from .solver import (
    HorizontalThresholds,
    SolveReport,
    ThresholdMatching,
    brute_force,
    foc_residual,
    iron_monotone,
    solve_horizontal,
    solve_pointwise_affine,
    solve_threshold,
)

__all__ = [name for name in dir() if not name.startswith("_")]
