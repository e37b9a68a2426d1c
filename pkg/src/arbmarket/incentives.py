"""Analytic layer: expected report payoffs, payment scaling, and fee calibration.

Everything here is closed-form or a one-dimensional root find. The central
quantities: an arbiter holding n securities can gain at most |n|/m by
distorting the outcome, so the agreement payment scale k must reach
2|n|/(m*delta) to neutralize it; budgets bound |n| through the market's fee
and liquidity; and fee revenue f*M must cover the resulting payments, which
pins down a minimum fee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .arbitration import BeliefModel
from .msr import FeeSchedule, Lmsr, max_long_shares, max_shares_infinite_liquidity, max_short_shares

ENTRY_MODES = ("single", "multiple")

# relative slack for comparing fee revenue against the required subsidy
_COVER_SLACK = 1e-9


class CalibrationInfeasible(ValueError):
    """No fee in (0, 1) satisfies the no-subsidy condition."""


@dataclass(frozen=True)
class IncentiveQuery:
    """One arbiter's situation: market stake, panel size, payment scale,
    beliefs, and privately observed signal."""

    shares: float
    m: int
    scale: float
    beliefs: BeliefModel
    own_signal: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"need at least 2 arbiters, got m={self.m}")
        if self.scale < 0:
            raise ValueError(f"payment scale must be nonnegative, got {self.scale}")
        if self.own_signal not in (0, 1):
            raise ValueError(f"own_signal must be 0 or 1, got {self.own_signal}")


def expected_report_payoff(query: IncentiveQuery, report: int, center: float | None = None) -> float:
    """Expected payoff from submitting `report` when all other arbiters are
    truthful, combining the market stake and the agreement payment.

    Conditioned on the arbiter's own signal, every other report is positive
    with the corresponding posterior probability, so the expected outcome is
    ((m-1)*posterior + report)/m and the peer agrees with a positive report
    with the posterior probability (and with a negative one against it).

    center defaults to the posterior midpoint; pass the prior instead to get
    the unmodified agreement payment for comparison.
    """
    if report not in (0, 1):
        raise ValueError(f"report must be 0 or 1, got {report}")
    p_peer = query.beliefs.posterior(query.own_signal)
    c = query.beliefs.midpoint if center is None else center
    if not 0 < c < 1:
        raise ValueError(f"center must lie strictly inside (0, 1), got {c}")
    market_term = query.shares * ((query.m - 1) * p_peer + report) / query.m
    if report == 1:
        agreement_term = p_peer * query.scale * (1 - c)
    else:
        agreement_term = (1 - p_peer) * query.scale * c
    return market_term + agreement_term


def truthful_advantage(query: IncentiveQuery, center: float | None = None) -> float:
    """Expected gain from reporting the observed signal rather than flipping it."""
    truthful = expected_report_payoff(query, query.own_signal, center)
    flipped = expected_report_payoff(query, 1 - query.own_signal, center)
    return truthful - flipped


def min_scale(shares: float, m: int, update_strength: float) -> float:
    """Smallest payment scale that makes truthful reporting a best response
    for an arbiter holding `shares` securities: 2|n|/(m*delta)."""
    if m < 2:
        raise ValueError(f"need at least 2 arbiters, got m={m}")
    if update_strength <= 0:
        raise ValueError(f"update strength must be positive, got {update_strength}")
    return 2 * abs(shares) / (m * update_strength)


@dataclass(frozen=True)
class CalibrationProblem:
    """Inputs that jointly determine payment scale and minimum fee.

    total_at_risk is the aggregate worst-case loss M across all traders;
    liquidity matters only in single-entry mode, where position caps depend
    on the cost curve.
    """

    update_strength: float
    budget: float
    total_at_risk: float
    entry_mode: str = "multiple"
    liquidity: float | None = None

    def __post_init__(self):
        if not 0 < self.update_strength <= 1:
            raise ValueError(f"update strength must be in (0, 1], got {self.update_strength}")
        if not 0 <= self.budget <= self.total_at_risk:
            raise ValueError(
                f"budget must satisfy 0 <= B <= M, got B={self.budget}, M={self.total_at_risk}"
            )
        if self.entry_mode not in ENTRY_MODES:
            raise ValueError(f"entry_mode must be one of {ENTRY_MODES}, got {self.entry_mode!r}")
        if self.entry_mode == "single" and not (self.liquidity and self.liquidity > 0):
            raise ValueError("single-entry calibration needs a positive liquidity")


def max_position(problem: CalibrationProblem, fee_rate: float) -> float:
    """Largest |n| a budget-B agent can accumulate under the given fee."""
    if problem.entry_mode == "multiple":
        return max_shares_infinite_liquidity(fee_rate, problem.budget)
    cf = Lmsr(problem.liquidity)
    fee = FeeSchedule(fee_rate)
    long_cap = max_long_shares(cf, fee, problem.budget)
    short_cap = abs(max_short_shares(cf, fee, problem.budget))
    return max(long_cap, short_cap)


def min_scale_for_budget(problem: CalibrationProblem, fee_rate: float, m: int) -> float:
    """Payment scale that neutralizes the largest stake a budget-B agent can
    hold: 2*max_position/(m*delta)."""
    return min_scale(max_position(problem, fee_rate), m, problem.update_strength)


def max_total_payment(m: int, scale: float) -> float:
    """Upper bound on the sum of all agreement payments in one round: at most
    one full payment of k per arbiter."""
    return m * scale


@dataclass(frozen=True)
class SubsidyCheck:
    holds: bool
    fee_revenue: float  # f * M
    required: float  # payment budget needed to neutralize every arbiter
    deficit: float


def required_revenue(problem: CalibrationProblem, fee_rate: float) -> float:
    """Arbiter-payment budget the fee pool must cover: m * k at the budget-
    calibrated scale, which is 2*max_position/delta independent of m."""
    return 2 * max_position(problem, fee_rate) / problem.update_strength


def subsidy_condition(problem: CalibrationProblem, fee_rate: float) -> SubsidyCheck:
    """Check whether fee revenue f*M covers the worst-case arbiter payments."""
    if not 0 < fee_rate < 1:
        raise ValueError(f"fee rate must lie in (0, 1), got {fee_rate}")
    revenue = fee_rate * problem.total_at_risk
    required = required_revenue(problem, fee_rate)
    holds = revenue + _COVER_SLACK * max(1.0, revenue) >= required
    return SubsidyCheck(
        holds=holds,
        fee_revenue=revenue,
        required=required,
        deficit=max(0.0, required - revenue),
    )


def _subsidy_gap(problem: CalibrationProblem, fee_rate: float) -> float:
    return fee_rate * problem.total_at_risk - required_revenue(problem, fee_rate)


def calibrate_min_fee(problem: CalibrationProblem) -> float:
    """Smallest fee whose revenue covers the arbiter payments it necessitates.

    Multiple entry has a closed form: the positive root of
    M*delta*f^2 - 2B*f - 2B = 0. Single entry solves the crossing of
    f*M against 2*max_position(f)/delta by bisection. The result is
    self-checked: the condition holds at the returned fee and fails just
    below it.
    """
    B, M, delta = problem.budget, problem.total_at_risk, problem.update_strength
    if B == 0:
        return 0.0  # zero stake needs zero subsidy
    if problem.entry_mode == "multiple":
        f_star = (B + math.sqrt(B * B + 2 * B * M * delta)) / (M * delta)
        if not f_star < 1:
            raise CalibrationInfeasible(
                f"required fee {f_star:.4f} is not below 1; "
                f"no fee can fund arbitration for B={B}, M={M}, delta={delta}"
            )
    else:
        lo, hi = 1e-9, 1 - 1e-9
        if _subsidy_gap(problem, hi) < 0:
            raise CalibrationInfeasible(
                f"fee revenue cannot cover arbiter payments anywhere in (0, 1) "
                f"for B={B}, M={M}, delta={delta}, b={problem.liquidity}"
            )
        while hi - lo > 1e-12 * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if _subsidy_gap(problem, mid) >= 0:
                hi = mid
            else:
                lo = mid
        f_star = hi  # the endpoint where the condition holds
    if not subsidy_condition(problem, f_star).holds:
        raise RuntimeError(f"calibration self-check failed at f={f_star}")
    if f_star > 2e-6 and subsidy_condition(problem, f_star - 1e-6).holds:
        raise RuntimeError(f"calibration self-check failed: {f_star - 1e-6} already suffices")
    return f_star


def min_fee_bisection(problem: CalibrationProblem) -> float:
    """Independent route to the minimum fee: bisect the revenue-vs-requirement
    gap written out directly, bypassing the position-cap helpers and the
    closed-form root. Exists to cross-check calibrate_min_fee."""
    B, M, delta = problem.budget, problem.total_at_risk, problem.update_strength
    if B == 0:
        return 0.0

    if problem.entry_mode == "multiple":
        def gap(f: float) -> float:
            return f * M - 2 * B * (1 + f) / (f * delta)
    else:
        b = problem.liquidity

        def gap(f: float) -> float:
            # log((1+f)e^{B/b} - 1) kept in log-space for large B/b
            x = B / b
            if x > 700:
                grown = x + math.log1p(f)
            else:
                grown = math.log((1 + f) * math.exp(x) - 1)
            return f * M - 2 * b * (grown - math.log(f)) / delta

    lo, hi = 1e-9, 1 - 1e-9
    if gap(lo) > 0:
        return lo
    if gap(hi) < 0:
        raise CalibrationInfeasible(
            f"no fee in (0, 1) covers arbiter payments for B={B}, M={M}, delta={delta}"
        )
    while hi - lo > 1e-12 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if gap(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi
