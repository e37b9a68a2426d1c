"""Scenario runner and calibration sweeps.

Wires the market, arbitration, and incentive layers into reproducible
experiments: a Scenario (JSON) describes traders, arbiters, and beliefs; a
RunReport captures prices, payoffs, the subsidy verdict, and a deviation-gain
table. Sweeps emit minimum-fee curves as CSV.
"""

from __future__ import annotations

import csv
import io
import math
import os
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .arbitration import (
    ArbitrationRound,
    BeliefModel,
    derive_posteriors,
    run_round,
    settle,
    simulate_deviation_gain,
)
from .engine import Market, open_market, worst_case_loss
from .incentives import (
    CalibrationInfeasible,
    CalibrationProblem,
    IncentiveQuery,
    calibrate_min_fee,
    max_total_payment,
    min_scale,
    truthful_advantage,
)

SEED_ENV_VAR = "ARBMARKET_SEED"

# shares below this are treated as "no trade"
_SHARE_TOL = 1e-9


def default_seed() -> int:
    return int(os.environ.get(SEED_ENV_VAR, "0"))


class BeliefSpec(BaseModel):
    """Belief inputs: either a generative model (latent outcome probability
    plus conditional signal rates) or explicit posteriors. When explicit and
    no prior is given, the market's closing price is used as the prior."""

    outcome_prob: float | None = None
    signal_prob_pos: float | None = None
    signal_prob_neg: float | None = None
    prior: float | None = None
    posterior_high: float | None = None
    posterior_low: float | None = None

    @model_validator(mode="after")
    def _one_route(self):
        gen = (self.outcome_prob, self.signal_prob_pos, self.signal_prob_neg)
        explicit = (self.posterior_high, self.posterior_low)
        if all(v is not None for v in gen):
            if any(v is not None for v in explicit) or self.prior is not None:
                raise ValueError("give either generative parameters or explicit posteriors, not both")
        elif any(v is not None for v in gen):
            raise ValueError("generative beliefs need all three parameters")
        elif not all(v is not None for v in explicit):
            raise ValueError("explicit beliefs need posterior_high and posterior_low")
        return self

    def resolve(self, fallback_prior: float) -> BeliefModel:
        if self.outcome_prob is not None:
            return derive_posteriors(self.outcome_prob, self.signal_prob_pos, self.signal_prob_neg)
        prior = self.prior if self.prior is not None else fallback_prior
        return BeliefModel(
            prior=prior, posterior_high=self.posterior_high, posterior_low=self.posterior_low
        )


class AgentSpec(BaseModel):
    id: str | None = None
    budget: float | None = Field(default=None, ge=0)  # None means unlimited
    valuation: float = Field(ge=0, le=1)  # subjective expected outcome
    is_arbiter: bool = False


class Scenario(BaseModel):
    """One end-to-end experiment: market parameters, traders, and arbitration."""

    b: float = Field(gt=0)  # market liquidity
    f: float = Field(gt=0, lt=1)  # fee rate
    entry_mode: Literal["single", "multiple"] = "multiple"
    agents: list[AgentSpec]
    m: int = Field(ge=2)  # arbiter count; arbiters beyond the flagged agents hold no position
    beliefs: BeliefSpec
    scale: float | Literal["auto"] = "auto"  # agreement payment scale policy
    seed: int | None = None
    passes: int = Field(default=1, ge=1)
    arrival_order: Literal["given", "shuffle"] = "given"

    @model_validator(mode="after")
    def _consistent(self):
        flagged = sum(a.is_arbiter for a in self.agents)
        if flagged > self.m:
            raise ValueError(f"{flagged} agents flagged as arbiters but m={self.m}")
        if self.entry_mode == "single" and self.passes != 1:
            raise ValueError("single-entry markets allow one pass only")
        ids = [a.id for a in self.agents if a.id is not None]
        if len(ids) != len(set(ids)):
            raise ValueError("agent ids must be unique")
        return self


class AgentResult(BaseModel):
    id: str
    is_arbiter: bool
    shares: float
    cash_paid: float
    fees_paid: float
    market_payout: float
    arbiter_payment: float
    net: float


class DeviationRow(BaseModel):
    """Expected gain from misreporting for one arbiter and one signal value,
    others truthful. Nonpositive analytic gain means truthfulness holds."""

    arbiter: str
    shares: float
    signal: int
    analytic_gain: float
    mc_gain: float | None = None
    mc_stderr: float | None = None


class SubsidyVerdict(BaseModel):
    fee_revenue: float
    payment_bound: float  # m * k, the most arbitration can pay out
    bound_covered: bool
    realized_payments: float
    realized_covered: bool
    deficit: float  # realized payments minus fee revenue, floored at 0


class RunReport(BaseModel):
    seed: int
    closing_price: float
    outcome: float
    scale: float
    center: float
    agents: list[AgentResult]
    fee_revenue: float
    total_arbiter_payments: float
    subsidy: SubsidyVerdict
    deviations: list[DeviationRow]
    conservation_residual: float
    arbitration: dict  # round export: {m, k, c, signals, reports, peers, outcome}


def desired_delta(market: Market, shares: float, valuation: float) -> float:
    """Trade that moves the fee-adjusted marginal price to the agent's
    valuation: liquidate while the raw price is past the valuation, then add
    exposure while the fee-loaded price still clears it."""
    cf = market.cost_fn
    f = market.fee.rate
    q = market.q
    p = cf.price(q)
    v = valuation

    def q_at(price: float) -> float:
        return cf.inverse_price(min(max(price, 1e-15), 1 - 1e-15))

    if p < v:  # raise position
        target = q
        if shares < 0:
            target = min(q - shares, q_at(v))  # cover shorts while p < v
        if target == q - shares or shares >= 0:
            buy_limit = q_at(v / (1 + f))  # long exposure while p*(1+f) < v
            target = max(target, buy_limit)
        return max(target - q, 0.0)
    if p > v:  # lower position
        target = q
        if shares > 0:
            target = max(q - shares, q_at(v))  # sell holdings while p > v
        if target == q - shares or shares <= 0:
            short_limit = q_at((v + f) / (1 + f))  # short while p - f(1-p) > v
            target = min(target, short_limit)
        return min(target - q, 0.0)
    return 0.0


def cap_to_budget(market: Market, agent_id: str, delta: float, budget: float | None) -> float:
    """Largest affordable fraction of the desired trade.

    Exposure along the scaled trade falls during any liquidation portion and
    rises afterwards, so the affordable set is an interval starting at zero
    and a boolean bisection on the fraction finds its edge.
    """
    if budget is None or delta == 0:
        return delta
    pos = market.position(agent_id)

    def feasible(t: float) -> bool:
        d = t * delta
        if d == 0:
            return True
        gross, fee = market.quote(agent_id, d)
        cash = pos.cash_paid + gross
        n = pos.shares + d
        wcl = max(0.0, cash, cash - n)
        # associate exactly as the engine does and leave its tolerance as
        # headroom, so a capped trade can never bounce off the budget check
        return wcl + (pos.fees_paid + fee) <= budget

    if feasible(1.0):
        return delta
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo * delta


def run_market_stage(scenario: Scenario, rng: np.random.Generator) -> tuple[Market, list[str]]:
    """Open the market and let every agent trade toward its valuation."""
    market = open_market(scenario.b, scenario.f, scenario.entry_mode)
    ids = [a.id if a.id is not None else f"agent_{i}" for i, a in enumerate(scenario.agents)]
    for _ in range(scenario.passes):
        order = list(range(len(scenario.agents)))
        if scenario.arrival_order == "shuffle":
            order = list(rng.permutation(len(scenario.agents)))
        for i in order:
            agent = scenario.agents[i]
            delta = desired_delta(market, market.position(ids[i]).shares, agent.valuation)
            delta = cap_to_budget(market, ids[i], delta, agent.budget)
            if abs(delta) < _SHARE_TOL:
                continue
            receipt = market.execute_trade(ids[i], delta, budget=agent.budget)
            # valuations live inside the fee-implied price band, so no
            # rational trade should land outside it
            assert not receipt.dominated, f"trader {ids[i]} crossed the price bounds"
    return market, ids


def _arbiter_ids(scenario: Scenario, ids: list[str]) -> list[str]:
    """Arbiter slots: flagged agents first, outside arbiters fill the rest."""
    slots = [ids[i] for i, a in enumerate(scenario.agents) if a.is_arbiter]
    j = 0
    while len(slots) < scenario.m:
        name = f"arbiter_{j}"
        if name not in ids:
            slots.append(name)
        j += 1
    return slots


def _auto_scale(market: Market, arbiter_ids: list[str], m: int, delta: float) -> float:
    """Smallest single payment scale covering every arbiter's realized stake."""
    return max(
        (min_scale(market.position(a).shares, m, delta) for a in arbiter_ids),
        default=0.0,
    )


def _deviation_table(
    market: Market,
    arbiter_ids: list[str],
    beliefs: BeliefModel,
    m: int,
    scale: float,
    mc_rounds: int = 0,
    rng: np.random.Generator | None = None,
) -> list[DeviationRow]:
    rows = []
    for a in arbiter_ids:
        shares = market.position(a).shares
        for signal in (0, 1):
            query = IncentiveQuery(shares=shares, m=m, scale=scale, beliefs=beliefs, own_signal=signal)
            row = DeviationRow(
                arbiter=a, shares=shares, signal=signal, analytic_gain=-truthful_advantage(query)
            )
            if mc_rounds:
                gain, err = simulate_deviation_gain(shares, m, scale, beliefs, signal, mc_rounds, rng)
                row.mc_gain, row.mc_stderr = gain, err
            rows.append(row)
    return rows


def run_scenario(scenario: Scenario, mc_rounds: int = 0) -> RunReport:
    """Execute both stages and assemble the report; deterministic given the
    scenario and seed."""
    seed = scenario.seed if scenario.seed is not None else default_seed()
    rng = np.random.default_rng(seed)

    market, ids = run_market_stage(scenario, rng)
    closing_price = market.close()
    beliefs = scenario.beliefs.resolve(fallback_prior=closing_price)

    arb_ids = _arbiter_ids(scenario, ids)
    m = scenario.m
    if scenario.scale == "auto":
        scale = _auto_scale(market, arb_ids, m, beliefs.update_strength)
    else:
        scale = float(scenario.scale)
    round_ = run_round(beliefs, m, scale, rng)
    report = settle(market, round_.outcome, round_)

    payments = dict(zip(arb_ids, report.arbiter_payments))
    results = []
    for i, agent_id in enumerate(ids):
        pos = market.position(agent_id)
        payout = report.market_payouts.get(agent_id, 0.0)
        payment = payments.get(agent_id, 0.0)
        results.append(
            AgentResult(
                id=agent_id,
                is_arbiter=scenario.agents[i].is_arbiter,
                shares=pos.shares,
                cash_paid=pos.cash_paid,
                fees_paid=pos.fees_paid,
                market_payout=payout,
                arbiter_payment=payment,
                net=payout + payment - pos.cash_paid - pos.fees_paid,
            )
        )
    for agent_id in arb_ids:
        if agent_id not in ids:
            results.append(
                AgentResult(
                    id=agent_id,
                    is_arbiter=True,
                    shares=0.0,
                    cash_paid=0.0,
                    fees_paid=0.0,
                    market_payout=0.0,
                    arbiter_payment=payments[agent_id],
                    net=payments[agent_id],
                )
            )

    bound = max_total_payment(m, scale)
    verdict = SubsidyVerdict(
        fee_revenue=market.collected_fees,
        payment_bound=bound,
        bound_covered=market.collected_fees + 1e-9 >= bound,
        realized_payments=report.total_arbiter_payments,
        realized_covered=report.fees_cover_payments,
        deficit=report.deficit,
    )
    residual = report.maker_net + sum(r.net for r in results)

    mc_rng = np.random.default_rng(seed + 1) if mc_rounds else None
    deviations = _deviation_table(market, arb_ids, beliefs, m, scale, mc_rounds, mc_rng)

    return RunReport(
        seed=seed,
        closing_price=closing_price,
        outcome=round_.outcome.value,
        scale=scale,
        center=round_.center,
        agents=results,
        fee_revenue=market.collected_fees,
        total_arbiter_payments=report.total_arbiter_payments,
        subsidy=verdict,
        deviations=deviations,
        conservation_residual=residual,
        arbitration=round_.to_dict(),
    )


def probe_deviations(scenario: Scenario, mc_rounds: int = 100_000) -> list[DeviationRow]:
    """Deviation table with Monte Carlo cross-checks alongside the analytics."""
    return run_scenario(scenario, mc_rounds=mc_rounds).deviations


class SweepGrid(BaseModel):
    """Grid for minimum-fee curves. Multiple-entry rows ignore liquidity;
    single-entry rows are produced once per liquidity value."""

    delta: list[float]
    B_over_M: list[float]
    entry_mode: list[Literal["single", "multiple"]] = ["single", "multiple"]
    b: list[float] = []
    M: float = Field(default=1e6, gt=0)

    @model_validator(mode="after")
    def _liquidity_present(self):
        if "single" in self.entry_mode and not self.b:
            raise ValueError("single-entry sweeps need at least one liquidity value")
        return self


def sweep_calibration(grid: SweepGrid) -> list[dict]:
    """One row per grid point: the minimum fee or NaN with a reason."""
    rows = []
    for mode in grid.entry_mode:
        liquidities = grid.b if mode == "single" else [None]
        for b in liquidities:
            for d in grid.delta:
                for frac in grid.B_over_M:
                    row = {
                        "delta": d,
                        "b": "" if b is None else b,
                        "entry_mode": mode,
                        "B_over_M": frac,
                        "min_fee": math.nan,
                        "reason": "",
                    }
                    try:
                        problem = CalibrationProblem(
                            update_strength=d,
                            budget=frac * grid.M,
                            total_at_risk=grid.M,
                            entry_mode=mode,
                            liquidity=b,
                        )
                        row["min_fee"] = calibrate_min_fee(problem)
                    except (CalibrationInfeasible, ValueError) as exc:
                        row["reason"] = str(exc)
                    rows.append(row)
    return rows


def sweep_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["delta", "b", "entry_mode", "B_over_M", "min_fee", "reason"])
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
