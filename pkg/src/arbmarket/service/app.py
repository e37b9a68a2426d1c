"""HTTP service exposing the market engine and the experiment tools.

Markets are held in memory and mutated under a per-market lock; the compute
endpoints (simulate, probe, calibrate, sweep) are stateless. The CLI talks to
this app in-process by default, so batch use needs no running server.
"""

from __future__ import annotations

import threading
import uuid

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..arbitration import run_round, settle
from ..engine import Market, TradeRejected, open_market
from ..harness import (
    RunReport,
    Scenario,
    SweepGrid,
    _auto_scale,
    default_seed,
    probe_deviations,
    run_scenario,
    sweep_calibration,
    sweep_to_csv,
)
from ..incentives import (
    CalibrationInfeasible,
    CalibrationProblem,
    calibrate_min_fee,
    min_fee_bisection,
)
from .schemas import (
    CalibrateRequest,
    CalibrateResponse,
    CloseResponse,
    CreateMarketRequest,
    MarketCreated,
    SettleRequest,
    SettleResponse,
    SweepResponse,
    TradeRequest,
    TradeResponse,
)


class MarketNotFound(KeyError):
    pass


class _Registry:
    def __init__(self):
        self._markets: dict[str, tuple[Market, threading.Lock]] = {}
        self._lock = threading.Lock()

    def create(self, market: Market) -> str:
        market_id = uuid.uuid4().hex[:12]
        with self._lock:
            self._markets[market_id] = (market, threading.Lock())
        return market_id

    def get(self, market_id: str) -> tuple[Market, threading.Lock]:
        try:
            return self._markets[market_id]
        except KeyError:
            raise MarketNotFound(market_id) from None


def create_app() -> FastAPI:
    app = FastAPI(title="arbmarket", version="1.0")
    registry = _Registry()

    @app.exception_handler(TradeRejected)
    async def _trade_rejected(request: Request, exc: TradeRejected):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(MarketNotFound)
    async def _not_found(request: Request, exc: MarketNotFound):
        return JSONResponse(status_code=404, content={"detail": f"no market {exc.args[0]!r}"})

    @app.exception_handler(CalibrationInfeasible)
    async def _infeasible(request: Request, exc: CalibrationInfeasible):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _domain_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/markets", response_model=MarketCreated)
    def create_market(req: CreateMarketRequest):
        market = open_market(req.b, req.f, req.entry_mode)
        market_id = registry.create(market)
        return MarketCreated(market_id=market_id, snapshot=market.snapshot())

    @app.get("/markets/{market_id}")
    def get_market(market_id: str):
        market, lock = registry.get(market_id)
        with lock:
            return market.snapshot()

    @app.post("/markets/{market_id}/trades", response_model=TradeResponse)
    def trade(market_id: str, req: TradeRequest):
        market, lock = registry.get(market_id)
        with lock:
            receipt = market.execute_trade(req.agent_id, req.delta, budget=req.budget)
            price = market.price()
        return TradeResponse.of(receipt, price)

    @app.post("/markets/{market_id}/close", response_model=CloseResponse)
    def close(market_id: str):
        market, lock = registry.get(market_id)
        with lock:
            return CloseResponse(closing_price=market.close())

    @app.post("/markets/{market_id}/settle", response_model=SettleResponse)
    def settle_market(market_id: str, req: SettleRequest):
        market, lock = registry.get(market_id)
        with lock:
            if not market.closed:
                market.close()
            beliefs = req.beliefs.resolve(fallback_prior=market.price())
            if req.scale == "auto":
                scale = _auto_scale(market, list(market.ledger), req.m, beliefs.update_strength)
            else:
                scale = float(req.scale)
            seed = req.seed if req.seed is not None else default_seed()
            round_ = run_round(beliefs, req.m, scale, np.random.default_rng(seed))
            report = settle(market, round_.outcome, round_)
        return SettleResponse(
            outcome=report.outcome,
            scale=scale,
            market_payouts=report.market_payouts,
            arbiter_payments=report.arbiter_payments,
            total_arbiter_payments=report.total_arbiter_payments,
            fee_pool=report.fee_pool,
            fees_cover_payments=report.fees_cover_payments,
            deficit=report.deficit,
            maker_net=report.maker_net,
            arbitration=round_.to_dict(),
        )

    @app.post("/simulate", response_model=RunReport)
    def simulate(scenario: Scenario):
        return run_scenario(scenario)

    @app.post("/probe")
    def probe(scenario: Scenario, mc_rounds: int = 100_000):
        return [row.model_dump() for row in probe_deviations(scenario, mc_rounds=mc_rounds)]

    @app.post("/calibrate", response_model=CalibrateResponse)
    def calibrate(req: CalibrateRequest):
        problem = CalibrationProblem(
            update_strength=req.delta,
            budget=req.B,
            total_at_risk=req.M,
            entry_mode=req.entry,
            liquidity=req.b,
        )
        fee = calibrate_min_fee(problem)
        check = min_fee_bisection(problem)
        return CalibrateResponse(min_fee=fee, bisection_check=check, agreement=abs(fee - check))

    @app.post("/sweep", response_model=SweepResponse)
    def sweep(grid: SweepGrid):
        rows = sweep_calibration(grid)
        return SweepResponse(rows=rows, csv=sweep_to_csv(rows))

    return app


app = create_app()
