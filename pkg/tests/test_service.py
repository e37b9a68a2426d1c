"""HTTP layer: market lifecycle, error mapping, and parity with the library."""

import pytest
from fastapi.testclient import TestClient

from arbmarket.harness import AgentSpec, BeliefSpec, Scenario, run_scenario
from arbmarket.service import create_app


@pytest.fixture()
def client():
    with TestClient(create_app()) as c:
        yield c


def make_market(client, **overrides):
    body = dict(b=100.0, f=0.05, entry_mode="multiple")
    body.update(overrides)
    resp = client.post("/markets", json=body)
    assert resp.status_code == 200, resp.text
    return resp.json()["market_id"]


SCENARIO = dict(
    b=100.0,
    f=0.05,
    entry_mode="multiple",
    agents=[
        {"id": "bull", "budget": 40.0, "valuation": 0.8, "is_arbiter": True},
        {"id": "bear", "budget": 40.0, "valuation": 0.3, "is_arbiter": True},
    ],
    m=4,
    beliefs={"outcome_prob": 0.6, "signal_prob_pos": 0.9, "signal_prob_neg": 0.2},
    seed=7,
)


def test_healthz(client):
    assert client.get("/healthz").json() == {"status": "ok"}


def test_market_lifecycle(client):
    mid = make_market(client)
    trade = client.post(f"/markets/{mid}/trades", json={"agent_id": "a", "delta": 50.0})
    assert trade.status_code == 200
    body = trade.json()
    assert body["gross_cost"] > 0 and body["fee"] == pytest.approx(0.05 * body["gross_cost"])
    assert body["price"] > 0.5

    snap = client.get(f"/markets/{mid}").json()
    assert set(snap) == {"b", "f", "q", "agents", "collected_fees"}
    assert snap["q"] == 50.0
    (agent,) = snap["agents"]
    assert set(agent) == {"id", "n", "c", "B", "fees"}
    assert agent["B"] is None  # no budget supplied

    closed = client.post(f"/markets/{mid}/close")
    assert closed.status_code == 200
    assert closed.json()["closing_price"] == pytest.approx(body["price"])

    rejected = client.post(f"/markets/{mid}/trades", json={"agent_id": "a", "delta": 1.0})
    assert rejected.status_code == 409


def test_budget_violation_maps_to_409(client):
    mid = make_market(client)
    resp = client.post(
        f"/markets/{mid}/trades", json={"agent_id": "a", "delta": 200.0, "budget": 1.0}
    )
    assert resp.status_code == 409
    assert "budget" in resp.json()["detail"].lower()
    # market state untouched by the rejected trade
    assert client.get(f"/markets/{mid}").json()["q"] == 0.0


def test_single_entry_reentry_maps_to_409(client):
    mid = make_market(client, entry_mode="single")
    assert client.post(f"/markets/{mid}/trades", json={"agent_id": "a", "delta": 5.0}).status_code == 200
    resp = client.post(f"/markets/{mid}/trades", json={"agent_id": "a", "delta": 5.0})
    assert resp.status_code == 409


def test_unknown_market_is_404(client):
    assert client.get("/markets/deadbeef").status_code == 404
    assert client.post("/markets/deadbeef/trades", json={"agent_id": "a", "delta": 1.0}).status_code == 404


def test_settle_runs_arbitration(client):
    mid = make_market(client)
    client.post(f"/markets/{mid}/trades", json={"agent_id": "a", "delta": 80.0})
    resp = client.post(
        f"/markets/{mid}/settle",
        json={
            "m": 4,
            "beliefs": {"outcome_prob": 0.6, "signal_prob_pos": 0.9, "signal_prob_neg": 0.2},
            "seed": 3,
        },
    )
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert body["outcome"] in (0, 1)
    assert set(body["arbitration"]) >= {"m", "k", "c", "signals", "reports", "peers", "outcome"}
    assert body["fees_cover_payments"] == (body["deficit"] <= 1e-9)
    # payout to the lone trader matches outcome * shares
    assert body["market_payouts"]["a"] == pytest.approx(body["outcome"] * 80.0)


def test_simulate_matches_library(client):
    resp = client.post("/simulate", json=SCENARIO)
    assert resp.status_code == 200, resp.text
    direct = run_scenario(Scenario.model_validate(SCENARIO))
    assert resp.json() == direct.model_dump(mode="json")


def test_probe_includes_monte_carlo(client):
    resp = client.post("/probe?mc_rounds=20000", json=SCENARIO)
    assert resp.status_code == 200, resp.text
    rows = resp.json()
    assert rows and all(r["mc_gain"] is not None for r in rows)


def test_calibrate_endpoint_agrees_with_bisection(client):
    resp = client.post(
        "/calibrate",
        json={"delta": 1.0, "B": 1000.0, "M": 1_000_000.0, "entry": "multiple"},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["min_fee"] == pytest.approx(0.0457, abs=0.001)
    assert body["agreement"] <= 1e-6
    assert body["bisection_check"] == pytest.approx(body["min_fee"], abs=1e-6)


def test_calibrate_infeasible_maps_to_422(client):
    resp = client.post(
        "/calibrate", json={"delta": 1.0, "B": 1.0, "M": 1.0, "entry": "multiple"}
    )
    assert resp.status_code == 422


def test_sweep_returns_rows_and_csv(client):
    resp = client.post(
        "/sweep",
        json={"delta": [1.0], "B_over_M": [0.001], "entry_mode": ["multiple"], "M": 1e6},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["rows"]) == 1
    assert body["csv"].splitlines()[0] == "delta,b,entry_mode,B_over_M,min_fee,reason"


def test_validation_errors_are_422(client):
    assert client.post("/markets", json={"b": -5.0, "f": 0.05}).status_code == 422
    mid = make_market(client)
    assert client.post(f"/markets/{mid}/trades", json={"agent_id": "a"}).status_code == 422
