"""Stateful trading stage: fee-bearing trades against a cost-function market maker.

The engine enforces per-agent budgets as caps on worst-case loss (fees
included), splits position-crossing trades into a fee-free liquidation leg
and a fee-charged exposure leg, and tracks the aggregate at-risk total M
whose fee share funds the arbitration stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .msr import CostFunction, FeeSchedule, Lmsr, price_bounds

ENTRY_MODES = ("single", "multiple")

# Monetary comparisons tolerate float noise at the nano-dollar level.
CASH_TOL = 1e-9


class TradeRejected(ValueError):
    """Trade refused; market state is unchanged."""


class BudgetExceeded(TradeRejected):
    pass


class ReentryRejected(TradeRejected):
    """Second trade by the same agent in single-entry mode."""


class MarketClosed(TradeRejected):
    pass


@dataclass(frozen=True)
class AgentPosition:
    """One agent's ledger entry: signed shares, net cash paid, budget, fees."""

    shares: float = 0.0
    cash_paid: float = 0.0  # net dollars paid to the maker, negative for net sellers
    budget: float = math.inf
    fees_paid: float = 0.0


def worst_case_loss(position: AgentPosition) -> float:
    """Largest loss over settlement outcomes in [0, 1], excluding fees.

    The payout is linear in the outcome, so only the endpoints matter:
    cash_paid at 0 and cash_paid - shares at 1. A locked-in profit counts
    as zero loss rather than a negative one.
    """
    return max(0.0, position.cash_paid, position.cash_paid - position.shares)


@dataclass(frozen=True)
class TradeReceipt:
    agent_id: str
    delta: float
    gross_cost: float
    fee: float
    position: AgentPosition
    q_after: float
    dominated: bool  # trade pushed q beyond the fee-implied price bounds


class Market:
    """A single market's mutable trading state.

    Mutate under exclusive access; independent markets are independent.
    """

    def __init__(self, cost_fn: CostFunction, fee: FeeSchedule, entry_mode: str = "multiple"):
        if entry_mode not in ENTRY_MODES:
            raise ValueError(f"entry_mode must be one of {ENTRY_MODES}, got {entry_mode!r}")
        if fee.rate >= 1:
            raise ValueError(f"fee rate must be below 1, got {fee.rate}")
        self.cost_fn = cost_fn
        self.fee = fee
        self.entry_mode = entry_mode
        self.q = 0.0
        self.ledger: dict[str, AgentPosition] = {}
        self.collected_fees = 0.0
        self.closed = False
        self._bounds = price_bounds(cost_fn, fee)

    @property
    def bounds(self):
        return self._bounds

    def price(self) -> float:
        return self.cost_fn.price(self.q)

    def position(self, agent_id: str) -> AgentPosition:
        return self.ledger.get(agent_id, AgentPosition())

    def quote(self, agent_id: str, delta: float) -> tuple[float, float]:
        """(gross cost, fee) the given trade would incur, without executing it."""
        if delta == 0:
            raise TradeRejected("delta must be nonzero")
        gross = self.cost_fn.trade_cost(self.q, self.q + delta)
        fee = self._exposure_fee(self.position(agent_id).shares, delta)
        return gross, fee

    def _exposure_fee(self, shares_before: float, delta: float) -> float:
        """Fee on the risk-increasing portion of a trade.

        The trade is split where the agent's position crosses zero: the
        liquidating leg is free; a buying exposure leg pays rate * cost and a
        shorting exposure leg pays rate * (shares sold - proceeds).
        """
        if shares_before * delta >= 0 or abs(delta) > abs(shares_before):
            # no liquidation, or liquidation plus a crossing remainder
            liq = 0.0 if shares_before * delta >= 0 else -shares_before
        else:
            return 0.0  # pure liquidation
        q_mid = self.q + liq
        q_end = self.q + delta
        leg = q_end - q_mid
        if leg > 0:
            return self.fee.rate * self.cost_fn.trade_cost(q_mid, q_end)
        proceeds = -self.cost_fn.trade_cost(q_mid, q_end)
        return self.fee.rate * (-leg - proceeds)

    def execute_trade(self, agent_id: str, delta: float, budget: float | None = None) -> TradeReceipt:
        """Atomically execute a trade, or raise TradeRejected leaving state untouched.

        budget fixes the agent's worst-case-loss cap on first contact and is
        ignored afterwards (None means unlimited).
        """
        if self.closed:
            raise MarketClosed("market is closed")
        if delta == 0:
            raise TradeRejected("delta must be nonzero")
        if agent_id in self.ledger:
            if self.entry_mode == "single":
                raise ReentryRejected(f"agent {agent_id!r} already traded in a single-entry market")
            pos = self.ledger[agent_id]
        else:
            pos = AgentPosition(budget=math.inf if budget is None else float(budget))

        gross = self.cost_fn.trade_cost(self.q, self.q + delta)
        fee = self._exposure_fee(pos.shares, delta)
        new_pos = replace(
            pos,
            shares=pos.shares + delta,
            cash_paid=pos.cash_paid + gross,
            fees_paid=pos.fees_paid + fee,
        )
        exposure = worst_case_loss(new_pos) + new_pos.fees_paid
        if exposure > new_pos.budget + CASH_TOL:
            raise BudgetExceeded(
                f"trade exposes agent {agent_id!r} to {exposure:.6f} "
                f"against budget {new_pos.budget:.6f}"
            )

        q_after = self.q + delta
        dominated = (delta > 0 and q_after > self._bounds.q_plus + CASH_TOL) or (
            delta < 0 and q_after < self._bounds.q_minus - CASH_TOL
        )
        self.q = q_after
        self.ledger[agent_id] = new_pos
        self.collected_fees += fee
        return TradeReceipt(
            agent_id=agent_id,
            delta=delta,
            gross_cost=gross,
            fee=fee,
            position=new_pos,
            q_after=q_after,
            dominated=dominated,
        )

    def close(self) -> float:
        """Stop trading; returns the closing price."""
        self.closed = True
        return self.price()

    def total_worst_case_loss(self) -> float:
        """Aggregate at-risk total M: sum of per-agent worst-case losses."""
        return sum(worst_case_loss(p) for p in self.ledger.values())

    def fee_revenue(self) -> float:
        return self.collected_fees

    def maker_cash(self) -> float:
        """Cash held by the maker before settlement: net trade flow plus fees."""
        return sum(p.cash_paid for p in self.ledger.values()) + self.collected_fees

    def snapshot(self) -> dict:
        """Ledger snapshot in the documented wire format."""
        return {
            "b": self.cost_fn.liquidity,
            "f": self.fee.rate,
            "q": self.q,
            "agents": [
                {
                    "id": agent_id,
                    "n": p.shares,
                    "c": p.cash_paid,
                    "B": None if math.isinf(p.budget) else p.budget,
                    "fees": p.fees_paid,
                }
                for agent_id, p in self.ledger.items()
            ],
            "collected_fees": self.collected_fees,
        }


def open_market(liquidity: float, fee_rate: float, entry_mode: str = "multiple") -> Market:
    """Set up an LMSR market with the given liquidity and multiplicative fee."""
    return Market(Lmsr(liquidity), FeeSchedule(fee_rate), entry_mode=entry_mode)
