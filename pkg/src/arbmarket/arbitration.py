"""Arbitration stage: signal beliefs, peer-scored reports, and settlement.

After trading closes, a panel of m arbiters each observes a binary signal
and reports it. The market outcome is the fraction of positive reports.
Each arbiter is also paid by agreement with a random peer, scaled by k and
centered at the midpoint of the two posterior beliefs, which is what makes
truthful reporting resistant to outcome manipulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import Market

PROB_TOL = 1e-12


@dataclass(frozen=True)
class GenerativeSignalModel:
    """Latent-state signal model: X ~ Bernoulli(outcome_prob), then each
    arbiter's signal is an independent Bernoulli draw whose rate depends on X.
    """

    outcome_prob: float  # P(X = 1)
    signal_prob_pos: float  # P(signal = 1 | X = 1)
    signal_prob_neg: float  # P(signal = 1 | X = 0)

    def __post_init__(self):
        for name in ("outcome_prob", "signal_prob_pos", "signal_prob_neg"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    def draw(self, m: int, rng: np.random.Generator) -> tuple[int, np.ndarray]:
        """Sample the latent state and m conditionally independent signals."""
        state = int(rng.random() < self.outcome_prob)
        rate = self.signal_prob_pos if state else self.signal_prob_neg
        return state, (rng.random(m) < rate).astype(np.int8)


@dataclass(frozen=True)
class BeliefModel:
    """An arbiter's beliefs about a peer's signal.

    prior is the unconditional probability the peer's signal is positive;
    posterior_high / posterior_low condition on the arbiter's own signal
    being 1 / 0. The gap between them (the update strength) measures how
    much one signal reveals about another, and must be positive for peer
    scoring to work at all.
    """

    prior: float
    posterior_high: float
    posterior_low: float
    generative: GenerativeSignalModel | None = None

    def __post_init__(self):
        lo, mid, hi = self.posterior_low, self.prior, self.posterior_high
        if not (-PROB_TOL <= lo <= mid + PROB_TOL and mid <= hi + PROB_TOL and hi <= 1 + PROB_TOL):
            raise ValueError(
                f"beliefs must satisfy 0 <= low <= prior <= high <= 1, "
                f"got low={lo}, prior={mid}, high={hi}"
            )
        if self.update_strength <= 0:
            raise ValueError(
                f"posterior_high must exceed posterior_low, got gap {self.update_strength}"
            )

    @property
    def update_strength(self) -> float:
        return self.posterior_high - self.posterior_low

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.posterior_low + self.posterior_high)

    def posterior(self, own_signal: int) -> float:
        return self.posterior_high if own_signal else self.posterior_low

    def draw_signals(self, m: int, rng: np.random.Generator) -> np.ndarray:
        """Sample m signals; uses the generative model when present, otherwise
        a two-state stand-in with the prior as the state probability and the
        posteriors as the conditional signal rates."""
        model = self.generative or GenerativeSignalModel(
            self.prior, self.posterior_high, self.posterior_low
        )
        return model.draw(m, rng)[1]


def derive_posteriors(
    outcome_prob: float, signal_prob_pos: float, signal_prob_neg: float
) -> BeliefModel:
    """Compute peer-signal beliefs from a latent-state model by Bayes' rule.

    With conditionally independent signals, the chance a peer's signal is
    positive given one's own is a mixture of the two conditional rates
    weighted by the posterior over the latent state.
    """
    gen = GenerativeSignalModel(outcome_prob, signal_prob_pos, signal_prob_neg)
    t, a, d = outcome_prob, signal_prob_pos, signal_prob_neg
    prior = t * a + (1 - t) * d
    if not PROB_TOL < prior < 1 - PROB_TOL:
        raise ValueError(f"degenerate model: P(signal=1) = {prior}")
    high = (t * a * a + (1 - t) * d * d) / prior
    low = (t * a * (1 - a) + (1 - t) * d * (1 - d)) / (1 - prior)
    if high - low <= 0:
        raise ValueError(
            f"signals are uninformative: posterior gap {high - low} is not positive"
        )
    return BeliefModel(prior=prior, posterior_high=high, posterior_low=low, generative=gen)


def aggregate_worst_case(models: list[BeliefModel]) -> BeliefModel:
    """Collapse heterogeneous arbiter beliefs to the least favorable pair:
    the smallest high posterior and the largest low posterior. Payments
    calibrated against the result are conservative for every arbiter."""
    if not models:
        raise ValueError("need at least one belief model")
    high = min(bm.posterior_high for bm in models)
    low = max(bm.posterior_low for bm in models)
    if high - low <= 0:
        raise ValueError("aggregated beliefs have non-positive update strength")
    # models share one prior (the market's closing price); each individual
    # model brackets it, so the aggregate brackets it too
    return BeliefModel(prior=models[0].prior, posterior_high=high, posterior_low=low)


def assign_peers(m: int, rng: np.random.Generator) -> np.ndarray:
    """Pair each of m arbiters with a uniformly random other arbiter.

    Pairs need not be mutual: i's peer being j says nothing about j's peer.
    """
    if m < 2:
        raise ValueError(f"need at least 2 arbiters, got {m}")
    offsets = rng.integers(1, m, size=m)
    return (np.arange(m) + offsets) % m


def peer_payment(report_i: int, report_j: int, scale: float, center: float) -> float:
    """Agreement payment: scale*center for matching negatives, scale*(1-center)
    for matching positives, nothing on disagreement."""
    if scale < 0:
        raise ValueError(f"payment scale must be nonnegative, got {scale}")
    if not 0 < center < 1:
        raise ValueError(f"center must lie strictly inside (0, 1), got {center}")
    if report_i != report_j:
        return 0.0
    return scale * (1 - center) if report_i else scale * center


@dataclass(frozen=True)
class Outcome:
    """Fractional market outcome: the share of arbiters reporting 1."""

    positive_reports: int
    total: int

    def __post_init__(self):
        if self.total < 2:
            raise ValueError(f"need at least 2 reports, got {self.total}")
        if not 0 <= self.positive_reports <= self.total:
            raise ValueError("positive report count out of range")

    @property
    def value(self) -> float:
        return self.positive_reports / self.total


def resolve_outcome(reports) -> Outcome:
    reports = np.asarray(reports)
    if reports.size < 2:
        raise ValueError(f"need at least 2 reports, got {reports.size}")
    if not np.isin(reports, (0, 1)).all():
        raise ValueError("reports must be 0 or 1")
    return Outcome(positive_reports=int(reports.sum()), total=int(reports.size))


@dataclass(frozen=True)
class ArbitrationRound:
    """One completed arbitration: who saw what, who said what, who scored whom."""

    scale: float  # agreement payment scale k
    center: float  # agreement payment center, midway between the posteriors
    signals: np.ndarray
    reports: np.ndarray
    peers: np.ndarray
    outcome: Outcome = field(init=False)

    def __post_init__(self):
        m = len(self.reports)
        if len(self.signals) != m or len(self.peers) != m:
            raise ValueError("signals, reports, and peers must have equal length")
        if any(self.peers[i] == i for i in range(m)):
            raise ValueError("an arbiter cannot be its own peer")
        object.__setattr__(self, "outcome", resolve_outcome(self.reports))

    @property
    def m(self) -> int:
        return len(self.reports)

    def payment(self, i: int) -> float:
        return peer_payment(
            int(self.reports[i]), int(self.reports[self.peers[i]]), self.scale, self.center
        )

    def payments(self) -> list[float]:
        return [self.payment(i) for i in range(self.m)]

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "k": self.scale,
            "c": self.center,
            "signals": [int(s) for s in self.signals],
            "reports": [int(r) for r in self.reports],
            "peers": [int(p) for p in self.peers],
            "outcome": self.outcome.value,
        }


def run_round(
    beliefs: BeliefModel,
    m: int,
    scale: float,
    rng: np.random.Generator,
    reports: np.ndarray | None = None,
) -> ArbitrationRound:
    """Draw signals, collect reports (truthful unless supplied), assign peers.

    All reports enter in one call: no arbiter conditions on another's report.
    """
    signals = beliefs.draw_signals(m, rng)
    if reports is None:
        reports = signals.copy()
    return ArbitrationRound(
        scale=scale,
        center=beliefs.midpoint,
        signals=signals,
        reports=np.asarray(reports, dtype=np.int8),
        peers=assign_peers(m, rng),
    )


@dataclass(frozen=True)
class SettlementReport:
    outcome: float
    market_payouts: dict[str, float]  # agent id -> shares * outcome
    arbiter_payments: list[float]  # by arbiter index
    total_arbiter_payments: float
    fee_pool: float
    fees_cover_payments: bool
    deficit: float  # arbiter payments not covered by fees; 0 when covered
    maker_net: float


def settle(market: Market, outcome: Outcome, round: ArbitrationRound | None = None) -> SettlementReport:
    """Pay out shares at the fractional outcome and arbiters by peer agreement.

    Arbiter payments come out of collected fees; if they exceed the pool the
    shortfall is reported as a deficit rather than scaling anyone down.
    """
    if not market.closed:
        raise ValueError("market must be closed before settlement")
    x = outcome.value
    payouts = {agent_id: pos.shares * x for agent_id, pos in market.ledger.items()}
    payments = round.payments() if round is not None else []
    total_payments = sum(payments)
    fee_pool = market.collected_fees
    deficit = max(0.0, total_payments - fee_pool)
    maker_net = market.maker_cash() - x * market.q - total_payments
    return SettlementReport(
        outcome=x,
        market_payouts=payouts,
        arbiter_payments=payments,
        total_arbiter_payments=total_payments,
        fee_pool=fee_pool,
        fees_cover_payments=deficit <= 1e-9,
        deficit=deficit,
        maker_net=maker_net,
    )


def simulate_arbiter_payoff(
    shares: float,
    m: int,
    scale: float,
    beliefs: BeliefModel,
    own_signal: int,
    own_report: int,
    rounds: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte Carlo estimate of one arbiter's expected payoff, holding `shares`
    securities, when every other arbiter reports truthfully.

    Conditioned on the arbiter's own signal, each other report is Bernoulli
    with the matching posterior; the payoff is shares times the outcome plus
    the agreement payment from a random peer. Returns (mean, standard error).
    """
    if m < 2:
        raise ValueError(f"need at least 2 arbiters, got {m}")
    rate = beliefs.posterior(own_signal)
    c = beliefs.midpoint
    others = rng.random((rounds, m - 1)) < rate
    x_hat = (others.sum(axis=1) + own_report) / m
    peer_col = rng.integers(0, m - 1, size=rounds)
    peer_reports = others[np.arange(rounds), peer_col]
    if own_report == 1:
        payment = scale * (1 - c) * peer_reports
    else:
        payment = scale * c * (~peer_reports)
    samples = shares * x_hat + payment
    mean = float(samples.mean())
    stderr = float(samples.std(ddof=1) / math.sqrt(rounds))
    return mean, stderr


def simulate_deviation_gain(
    shares: float,
    m: int,
    scale: float,
    beliefs: BeliefModel,
    own_signal: int,
    rounds: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte Carlo estimate of the expected gain from flipping one's report,
    everyone else truthful. Truthful and flipped payoffs are evaluated on the
    same draws, so the outcome noise cancels and only the payment and the
    1/m outcome shift remain. Returns (mean gain, standard error)."""
    if m < 2:
        raise ValueError(f"need at least 2 arbiters, got {m}")
    rate = beliefs.posterior(own_signal)
    c = beliefs.midpoint
    peer = rng.random(rounds) < rate
    flipped = 1 - own_signal
    outcome_shift = shares * (flipped - own_signal) / m
    if own_signal == 1:
        payment_diff = scale * c * (~peer) - scale * (1 - c) * peer
    else:
        payment_diff = scale * (1 - c) * peer - scale * c * (~peer)
    samples = outcome_shift + payment_diff
    mean = float(samples.mean())
    stderr = float(samples.std(ddof=1) / math.sqrt(rounds))
    return mean, stderr
