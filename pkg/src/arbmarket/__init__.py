"""Prediction market with outcomes decided by peer-scored arbiter votes.

Layers: cost-function market mathematics (msr), the stateful trading engine
(engine), the arbitration stage (arbitration), analytic incentive bounds and
fee calibration (incentives), scenario simulation (harness), plus an HTTP
service and CLI on top.
"""

from .arbitration import (
    ArbitrationRound,
    BeliefModel,
    GenerativeSignalModel,
    Outcome,
    SettlementReport,
    aggregate_worst_case,
    assign_peers,
    derive_posteriors,
    peer_payment,
    resolve_outcome,
    run_round,
    settle,
    simulate_arbiter_payoff,
    simulate_deviation_gain,
)
from .engine import (
    AgentPosition,
    BudgetExceeded,
    Market,
    MarketClosed,
    ReentryRejected,
    TradeReceipt,
    TradeRejected,
    open_market,
    worst_case_loss,
)
from .harness import (
    AgentSpec,
    BeliefSpec,
    DeviationRow,
    RunReport,
    Scenario,
    SweepGrid,
    probe_deviations,
    run_scenario,
    sweep_calibration,
    sweep_to_csv,
)
from .incentives import (
    CalibrationInfeasible,
    CalibrationProblem,
    IncentiveQuery,
    SubsidyCheck,
    calibrate_min_fee,
    expected_report_payoff,
    max_position,
    max_total_payment,
    min_fee_bisection,
    min_scale,
    min_scale_for_budget,
    required_revenue,
    subsidy_condition,
    truthful_advantage,
)
from .msr import (
    CostFunction,
    FeeSchedule,
    Lmsr,
    PriceBounds,
    max_long_shares,
    max_shares_infinite_liquidity,
    max_short_shares,
    price_bounds,
)

__version__ = "1.0.0"

__all__ = [
    "AgentPosition",
    "AgentSpec",
    "ArbitrationRound",
    "BeliefModel",
    "BeliefSpec",
    "BudgetExceeded",
    "CalibrationInfeasible",
    "CalibrationProblem",
    "CostFunction",
    "DeviationRow",
    "FeeSchedule",
    "GenerativeSignalModel",
    "IncentiveQuery",
    "Lmsr",
    "Market",
    "MarketClosed",
    "Outcome",
    "PriceBounds",
    "ReentryRejected",
    "RunReport",
    "Scenario",
    "SettlementReport",
    "SubsidyCheck",
    "SweepGrid",
    "TradeReceipt",
    "TradeRejected",
    "aggregate_worst_case",
    "assign_peers",
    "calibrate_min_fee",
    "derive_posteriors",
    "expected_report_payoff",
    "max_long_shares",
    "max_position",
    "max_shares_infinite_liquidity",
    "max_short_shares",
    "max_total_payment",
    "min_fee_bisection",
    "min_scale",
    "min_scale_for_budget",
    "open_market",
    "peer_payment",
    "price_bounds",
    "probe_deviations",
    "required_revenue",
    "resolve_outcome",
    "run_round",
    "run_scenario",
    "settle",
    "simulate_arbiter_payoff",
    "simulate_deviation_gain",
    "subsidy_condition",
    "sweep_calibration",
    "sweep_to_csv",
    "truthful_advantage",
    "worst_case_loss",
]
