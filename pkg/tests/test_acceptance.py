"""Acceptance gate: the eight behavioral guarantees the package is built around.

Each criterion is one test that prints a PASS line when it holds (run with
`pytest -s` or execute this file directly to see the lines). Every test also
enforces its runtime budget.
"""

import math
import time

import numpy as np
import pytest

from arbmarket.arbitration import BeliefModel, simulate_arbiter_payoff
from arbmarket.engine import open_market, worst_case_loss
from arbmarket.harness import AgentSpec, BeliefSpec, Scenario, cap_to_budget, desired_delta, run_scenario
from arbmarket.incentives import (
    CalibrationProblem,
    IncentiveQuery,
    calibrate_min_fee,
    expected_report_payoff,
    min_fee_bisection,
    min_scale,
    truthful_advantage,
)
from arbmarket.msr import (
    FeeSchedule,
    Lmsr,
    max_long_shares,
    max_short_shares,
    max_shares_infinite_liquidity,
    price_bounds,
)


def beliefs_with_strength(delta: float) -> BeliefModel:
    return BeliefModel(prior=0.5, posterior_high=0.5 + delta / 2, posterior_low=0.5 - delta / 2)


def test_criterion_1_truthful_iff_scale_at_bound():
    """Truth-telling beats misreporting exactly when the agreement scale
    reaches twice the stake per arbiter divided by the update strength."""
    start = time.perf_counter()
    for n in (1.0, -1.0, 10.0, -10.0, 100.0, -100.0):
        for m in (2, 5, 10, 50):
            for delta in (0.1, 0.5, 1.0):
                bm = beliefs_with_strength(delta)
                k_star = min_scale(n, m, delta)
                assert k_star == pytest.approx(2 * abs(n) / (m * delta), abs=1e-15)

                def worst_advantage(k):
                    return min(
                        truthful_advantage(
                            IncentiveQuery(shares=n, m=m, scale=k, beliefs=bm, own_signal=s)
                        )
                        for s in (0, 1)
                    )

                assert abs(worst_advantage(k_star)) <= 1e-9
                assert worst_advantage(k_star * 1.01) > 0
                assert worst_advantage(k_star * 0.99) < 0
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"criterion 1 took {elapsed:.2f}s"
    print("PASS criterion 1: truthful advantage flips sign exactly at scale = 2|n|/(m*delta)")


def test_criterion_2_monte_carlo_matches_analytics():
    """Simulated arbiter payoffs reproduce the closed-form expectations."""
    start = time.perf_counter()
    bm = BeliefModel(prior=0.5, posterior_high=0.9, posterior_low=0.1)
    rounds = 1_000_000
    for report in (0, 1):
        q = IncentiveQuery(shares=100.0, m=10, scale=25.0, beliefs=bm, own_signal=0)
        analytic = expected_report_payoff(q, report)
        assert analytic == pytest.approx(20.25, abs=1e-12)
        mean, err = simulate_arbiter_payoff(
            shares=100.0, m=10, scale=25.0, beliefs=bm, own_signal=0,
            own_report=report, rounds=rounds, rng=np.random.default_rng(1234 + report),
        )
        assert abs(mean - analytic) < 3 * err, f"report {report}: {mean} vs {analytic} (err {err})"
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"criterion 2 took {elapsed:.2f}s"
    print("PASS criterion 2: 10^6-round Monte Carlo payoffs match analytic values (both 20.25)")


def test_criterion_3_price_band_and_dominated_trades():
    """Self-interested traders never push inventory past the fee band, and
    trades forced past it cannot profit even under their best outcome."""
    start = time.perf_counter()
    b, f = 50.0, 0.02
    bounds = price_bounds(Lmsr(b), FeeSchedule(f))
    rng = np.random.default_rng(99)
    for _ in range(1000):
        market = open_market(liquidity=b, fee_rate=f)
        # rational = each agent trades toward one fixed private valuation,
        # re-entering (and liquidating) as others move the price
        valuations = rng.uniform(0.01, 0.99, size=8)
        for _ in range(100):
            i = int(rng.integers(0, 8))
            agent = f"t{i}"
            delta = desired_delta(market, market.position(agent).shares, float(valuations[i]))
            if abs(delta) > 1e-12:
                receipt = market.execute_trade(agent, delta)
                assert not receipt.dominated
            assert bounds.q_minus - 1e-9 <= market.q <= bounds.q_plus + 1e-9

    # forced violations: start at the band edge, push further
    for seed in range(50):
        extra = float(np.random.default_rng(seed).uniform(1.0, 80.0))
        market = open_market(liquidity=b, fee_rate=f)
        market.execute_trade("pusher", bounds.q_plus)
        receipt = market.execute_trade("violator", extra)
        assert receipt.dominated
        best_case = extra - (receipt.gross_cost + receipt.fee)  # outcome resolves to 1
        assert best_case <= 1e-12

        market = open_market(liquidity=b, fee_rate=f)
        market.execute_trade("pusher", bounds.q_minus)
        receipt = market.execute_trade("violator", -extra)
        assert receipt.dominated
        best_case = -receipt.gross_cost - receipt.fee  # proceeds kept, outcome 0
        assert best_case <= 1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"criterion 3 took {elapsed:.2f}s"
    print("PASS criterion 3: q stays in [b*log f, -b*log f]; trades past the band never profit")


def test_criterion_4_budget_position_envelopes():
    """A budget-B trader's terminal position respects the entry-mode cap."""
    start = time.perf_counter()
    b, f = 40.0, 0.05
    cf = Lmsr(b)
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        budget = float(rng.uniform(1.0, 60.0))
        fee = FeeSchedule(f)
        envelope_single = max(max_long_shares(cf, fee, budget), abs(max_short_shares(cf, fee, budget)))
        envelope_multi = max_shares_infinite_liquidity(f, budget)

        market = open_market(liquidity=b, fee_rate=f, entry_mode="single")
        for i in range(3):
            agent = f"s{i}"
            valuation = float(rng.uniform(0.01, 0.99))
            delta = desired_delta(market, 0.0, valuation)
            if abs(delta) < 1e-12:
                continue
            delta = cap_to_budget(market, agent, delta, budget)
            if abs(delta) > 1e-12:
                market.execute_trade(agent, delta, budget=budget)
                assert abs(market.position(agent).shares) <= envelope_single + 1e-6

        market = open_market(liquidity=b, fee_rate=f, entry_mode="multiple")
        for _ in range(12):
            agent = f"m{rng.integers(0, 3)}"
            valuation = float(rng.uniform(0.01, 0.99))
            held = market.position(agent).shares
            delta = desired_delta(market, held, valuation)
            if abs(delta) < 1e-12:
                continue
            delta = cap_to_budget(market, agent, delta, budget)
            if abs(delta) > 1e-12:
                market.execute_trade(agent, delta, budget=budget)
        for i in range(3):
            assert abs(market.position(f"m{i}").shares) <= envelope_multi + 1e-6

    # deep liquidity makes the one-shot cap approach the re-entry cap
    phi = max_long_shares(Lmsr(1e8), FeeSchedule(0.05), 50.0)
    limit = max_shares_infinite_liquidity(0.05, 50.0)
    assert abs(phi - limit) / limit < 1e-3
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"criterion 4 took {elapsed:.2f}s"
    print("PASS criterion 4: positions stay inside the single/multiple-entry budget envelopes")


def test_criterion_5_calibration_operating_points():
    """The two reference operating points land where the closed-form and
    bisection solvers both say they should."""
    start = time.perf_counter()
    multi = CalibrationProblem(update_strength=1.0, budget=1000.0, total_at_risk=1e6, entry_mode="multiple")
    f_multi = calibrate_min_fee(multi)
    assert 0.035 <= f_multi <= 0.055
    assert f_multi == pytest.approx(0.04573253849269008, abs=1e-9)
    assert abs(f_multi - min_fee_bisection(multi)) <= 1e-6

    single = CalibrationProblem(
        update_strength=0.3, budget=5000.0, total_at_risk=1e6, entry_mode="single", liquidity=1000.0
    )
    f_single = calibrate_min_fee(single)
    assert 0.045 <= f_single <= 0.06
    assert f_single == pytest.approx(0.053194708629110896, abs=1e-6)
    assert abs(f_single - min_fee_bisection(single)) <= 1e-6
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"criterion 5 took {elapsed:.2f}s"
    print(f"PASS criterion 5: operating points f*={f_multi:.4f} (multiple), f*={f_single:.4f} (single); solvers agree")


def test_criterion_6_fee_revenue_covers_arbiter_payments():
    """End to end: a market priced above its calibrated fee funds arbitration
    from fees alone; one priced far below it reports a deficit."""
    start = time.perf_counter()
    beliefs = BeliefSpec(outcome_prob=0.6, signal_prob_pos=0.9, signal_prob_neg=0.2)

    funded = Scenario(
        b=100.0,
        f=0.2,
        entry_mode="multiple",
        agents=[AgentSpec(id=f"t{i}", budget=None, valuation=v) for i, v in enumerate(
            [0.9, 0.25, 0.8, 0.3, 0.85, 0.35, 0.75, 0.4]
        )] + [
            AgentSpec(id="a0", budget=1.0, valuation=0.7, is_arbiter=True),
            AgentSpec(id="a1", budget=1.0, valuation=0.45, is_arbiter=True),
        ],
        m=4,
        beliefs=beliefs,
        passes=2,
        seed=11,
    )
    report = run_scenario(funded)
    v = report.subsidy
    assert v.bound_covered, f"fee revenue {v.fee_revenue} under payment bound {v.payment_bound}"
    assert v.fee_revenue >= v.payment_bound * 1.05  # satisfied with margin, not by luck
    assert v.realized_covered and v.deficit == 0.0

    starved = Scenario(
        b=100.0,
        f=0.001,
        entry_mode="multiple",
        agents=[
            AgentSpec(id="a0", budget=None, valuation=0.85, is_arbiter=True),
            AgentSpec(id="a1", budget=None, valuation=0.2, is_arbiter=True),
            AgentSpec(id="t0", budget=None, valuation=0.6),
        ],
        m=4,
        beliefs=beliefs,
        seed=11,
    )
    report = run_scenario(starved)
    v = report.subsidy
    assert not v.bound_covered
    assert v.deficit > 0.0, "shortfall must be reported, not absorbed"
    assert not v.realized_covered
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"criterion 6 took {elapsed:.2f}s"
    print("PASS criterion 6: calibrated fees cover the m*k payment bound; starved fees report a deficit")


def test_criterion_7_midpoint_symmetrizes_deviation_resistance():
    """Centering agreement payments on the prior leaves one signal barely
    protected; centering on the posterior midpoint protects both equally."""
    start = time.perf_counter()
    prior, k = 0.89, 10.0
    bm = BeliefModel(prior=prior, posterior_high=0.9, posterior_low=0.1)
    gaps_prior = {}
    gaps_mid = {}
    for s in (0, 1):
        q = IncentiveQuery(shares=0.0, m=5, scale=k, beliefs=bm, own_signal=s)
        gaps_prior[s] = truthful_advantage(q, center=prior)
        gaps_mid[s] = truthful_advantage(q)
    # prior-centered: protection is lopsided across signals
    assert gaps_prior[0] == pytest.approx(k * (prior - 0.1), abs=1e-12)
    assert gaps_prior[1] == pytest.approx(k * (0.9 - prior), abs=1e-12)
    assert gaps_prior[0] / gaps_prior[1] > 10
    # midpoint-centered: both signals get exactly k*delta/2
    half = k * bm.update_strength / 2
    assert gaps_mid[0] == pytest.approx(half, abs=1e-12)
    assert gaps_mid[1] == pytest.approx(half, abs=1e-12)
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"criterion 7 took {elapsed:.2f}s"
    print("PASS criterion 7: midpoint centering equalizes deviation resistance at k*delta/2 per signal")


def test_criterion_8_conservation_over_random_scenarios():
    """Maker, traders, fee pool, and arbiters always sum to zero."""
    start = time.perf_counter()
    rng = np.random.default_rng(2026)
    for i in range(100):
        n_agents = int(rng.integers(2, 9))
        m = int(rng.integers(2, 7))
        flagged = min(n_agents, int(rng.integers(0, m + 1)))
        agents = []
        for j in range(n_agents):
            agents.append(
                AgentSpec(
                    id=f"g{j}",
                    budget=None if rng.random() < 0.5 else float(rng.uniform(1.0, 50.0)),
                    valuation=float(rng.uniform(0.05, 0.95)),
                    is_arbiter=j < flagged,
                )
            )
        entry = "single" if rng.random() < 0.5 else "multiple"
        sc = Scenario(
            b=float(rng.uniform(20.0, 300.0)),
            f=float(rng.uniform(0.01, 0.3)),
            entry_mode=entry,
            agents=agents,
            m=m,
            beliefs=BeliefSpec(
                outcome_prob=float(rng.uniform(0.2, 0.8)),
                signal_prob_pos=float(rng.uniform(0.55, 0.95)),
                signal_prob_neg=float(rng.uniform(0.05, 0.45)),
            ),
            seed=i,
            passes=1 if entry == "single" else int(rng.integers(1, 3)),
        )
        report = run_scenario(sc)
        assert abs(report.conservation_residual) <= 1e-9, (
            f"scenario {i} leaks {report.conservation_residual}"
        )
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"criterion 8 took {elapsed:.2f}s"
    print("PASS criterion 8: 100 random scenarios conserve cash to within 1e-9")


CRITERIA = [
    test_criterion_1_truthful_iff_scale_at_bound,
    test_criterion_2_monte_carlo_matches_analytics,
    test_criterion_3_price_band_and_dominated_trades,
    test_criterion_4_budget_position_envelopes,
    test_criterion_5_calibration_operating_points,
    test_criterion_6_fee_revenue_covers_arbiter_payments,
    test_criterion_7_midpoint_symmetrizes_deviation_resistance,
    test_criterion_8_conservation_over_random_scenarios,
]


if __name__ == "__main__":
    import sys
    import traceback

    failed = 0
    for idx, fn in enumerate(CRITERIA, start=1):
        try:
            fn()
        except Exception:
            failed += 1
            print(f"FAIL criterion {idx}: {fn.__name__}")
            traceback.print_exc()
    sys.exit(1 if failed else 0)
