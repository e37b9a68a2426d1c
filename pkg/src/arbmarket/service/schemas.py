"""Request and response shapes for the HTTP service."""

from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, Field

from ..engine import AgentPosition, TradeReceipt
from ..harness import BeliefSpec


class CreateMarketRequest(BaseModel):
    b: float = Field(gt=0)
    f: float = Field(gt=0, lt=1)
    entry_mode: Literal["single", "multiple"] = "multiple"


class MarketCreated(BaseModel):
    market_id: str
    snapshot: dict


class PositionView(BaseModel):
    shares: float
    cash_paid: float
    budget: float | None
    fees_paid: float

    @classmethod
    def of(cls, pos: AgentPosition) -> "PositionView":
        return cls(
            shares=pos.shares,
            cash_paid=pos.cash_paid,
            budget=None if math.isinf(pos.budget) else pos.budget,
            fees_paid=pos.fees_paid,
        )


class TradeRequest(BaseModel):
    agent_id: str
    delta: float
    budget: float | None = Field(default=None, ge=0)


class TradeResponse(BaseModel):
    agent_id: str
    delta: float
    gross_cost: float
    fee: float
    q_after: float
    price: float
    dominated: bool
    position: PositionView

    @classmethod
    def of(cls, receipt: TradeReceipt, price: float) -> "TradeResponse":
        return cls(
            agent_id=receipt.agent_id,
            delta=receipt.delta,
            gross_cost=receipt.gross_cost,
            fee=receipt.fee,
            q_after=receipt.q_after,
            price=price,
            dominated=receipt.dominated,
            position=PositionView.of(receipt.position),
        )


class CloseResponse(BaseModel):
    closing_price: float


class SettleRequest(BaseModel):
    m: int = Field(ge=2)
    beliefs: BeliefSpec
    scale: float | Literal["auto"] = "auto"
    seed: int | None = None


class SettleResponse(BaseModel):
    outcome: float
    scale: float
    market_payouts: dict[str, float]
    arbiter_payments: list[float]
    total_arbiter_payments: float
    fee_pool: float
    fees_cover_payments: bool
    deficit: float
    maker_net: float
    arbitration: dict


class CalibrateRequest(BaseModel):
    delta: float = Field(gt=0, le=1)
    B: float = Field(ge=0)
    M: float = Field(gt=0)
    entry: Literal["single", "multiple"] = "multiple"
    b: float | None = Field(default=None, gt=0)


class CalibrateResponse(BaseModel):
    min_fee: float
    bisection_check: float
    agreement: float  # absolute difference between the two routes


class SweepResponse(BaseModel):
    rows: list[dict]
    csv: str
