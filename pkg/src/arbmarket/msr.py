"""Cost-function market maker math for a binary security.

Implements the logarithmic market scoring rule (LMSR) plus the price and
holding bounds induced by a multiplicative trading fee: a fee rate f keeps
the marginal price inside [f/(1+f), 1/(1+f)], which in turn caps the number
of shares any budget-limited agent can acquire in one transaction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .solvers import bisect_monotone, expand_bracket


class CostFunction:
    """Convex, differentiable, strictly increasing trade-pricing function.

    Subclasses provide cost() and price() (= d cost / dq). The generic
    inverses below only rely on monotonicity, so any convex cost function
    works; LMSR overrides them with closed forms.
    """

    liquidity: float

    def cost(self, q: float) -> float:
        raise NotImplementedError

    def price(self, q: float) -> float:
        raise NotImplementedError

    def trade_cost(self, q_from: float, q_to: float) -> float:
        """Amount paid to move outstanding shares q_from -> q_to (negative for sales)."""
        return self.cost(q_to) - self.cost(q_from)

    def inverse_price(self, p: float) -> float:
        """Shares q at which price(q) == p, for p strictly inside (0, 1)."""
        if not 0.0 < p < 1.0:
            raise ValueError(f"price {p} outside (0, 1)")
        lo, hi = expand_bracket(lambda q: self.price(q) - p, step=self.liquidity)
        return bisect_monotone(lambda q: self.price(q) - p, lo, hi)

    def inverse_cost(self, target: float) -> float:
        """Shares q at which cost(q) == target."""
        lo, hi = expand_bracket(lambda q: self.cost(q) - target, step=self.liquidity)
        return bisect_monotone(lambda q: self.cost(q) - target, lo, hi)


class Lmsr(CostFunction):
    """LMSR cost function C(q) = b * log(1 + exp(q/b)) for a single binary security."""

    def __init__(self, liquidity: float):
        if not liquidity > 0:
            raise ValueError(f"liquidity must be positive, got {liquidity}")
        self.liquidity = float(liquidity)

    def cost(self, q: float) -> float:
        # softplus evaluated as max(q,0) + b*log1p(exp(-|q|/b)) to avoid overflow
        b = self.liquidity
        return max(q, 0.0) + b * math.log1p(math.exp(-abs(q / b)))

    def price(self, q: float) -> float:
        x = q / self.liquidity
        if x >= 0:
            return 1.0 / (1.0 + math.exp(-x))
        e = math.exp(x)
        return e / (1.0 + e)

    def inverse_price(self, p: float) -> float:
        if not 0.0 < p < 1.0:
            raise ValueError(f"price {p} outside (0, 1)")
        return self.liquidity * (math.log(p) - math.log1p(-p))

    def inverse_cost(self, target: float) -> float:
        if target <= 0:
            raise ValueError(f"cost is strictly positive, got target {target}")
        b = self.liquidity
        x = target / b
        if x > 30:  # exp(x) - 1 == exp(x) at double precision
            return target + b * math.log1p(-math.exp(-x))
        return b * math.log(math.expm1(x))


@dataclass(frozen=True)
class FeeSchedule:
    """Multiplicative fee on risk-increasing trades.

    A buy costing c is charged rate*c; a short sale of s shares bringing
    proceeds r is charged rate*(s - r). Liquidating trades are free.
    """

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"fee rate must be positive, got {self.rate}")

    @property
    def min_price(self) -> float:
        return self.rate / (1.0 + self.rate)

    @property
    def max_price(self) -> float:
        return 1.0 / (1.0 + self.rate)


@dataclass(frozen=True)
class PriceBounds:
    """Share counts where the fee pins the marginal price to its floor/ceiling."""

    q_minus: float
    q_plus: float
    p_min: float
    p_max: float


def price_bounds(cf: CostFunction, fee: FeeSchedule) -> PriceBounds:
    """Outstanding-share interval that no fee-paying rational trader exits.

    Selling below q_minus nets nothing after the fee (price = f/(1+f)), and
    buying above q_plus costs at least $1 per share including the fee.
    """
    if fee.rate >= 1:
        raise ValueError(f"fee rate must be below 1 for distinct price bounds, got {fee.rate}")
    if isinstance(cf, Lmsr):
        q_minus = cf.liquidity * math.log(fee.rate)
        q_plus = -q_minus
    else:
        q_minus = cf.inverse_price(fee.min_price)
        q_plus = cf.inverse_price(fee.max_price)
    return PriceBounds(q_minus=q_minus, q_plus=q_plus, p_min=fee.min_price, p_max=fee.max_price)


def max_long_shares(cf: CostFunction, fee: FeeSchedule, budget: float) -> float:
    """Largest long position reachable in one transaction with worst-case loss <= budget.

    The best case for the buyer is entering at the price floor q_minus, so the
    cap solves cost(q_minus + n) - cost(q_minus) = budget.
    """
    if budget < 0:
        raise ValueError(f"budget must be nonnegative, got {budget}")
    if budget == 0:
        return 0.0
    bounds = price_bounds(cf, fee)
    if isinstance(cf, Lmsr):
        b, f = cf.liquidity, fee.rate
        x = budget / b
        if x > 700:  # exp overflows; log((1+f)e^x - 1) == x + log(1+f) to double precision
            return b * (x + math.log1p(f) - math.log(f))
        return b * math.log1p((1.0 + f) * math.expm1(x) / f)
    return cf.inverse_cost(budget + cf.cost(bounds.q_minus)) - bounds.q_minus


def max_short_shares(cf: CostFunction, fee: FeeSchedule, budget: float) -> float:
    """Most negative position reachable in one transaction with worst-case loss <= budget.

    Shorting from the price ceiling q_plus down to q', the worst case pays out
    the q_plus - q' shares sold; the budget plus sale proceeds must cover it:
    budget + cost(q_plus) - cost(q') = q_plus - q'. Returns q' - q_plus <= 0.
    """
    if budget < 0:
        raise ValueError(f"budget must be nonnegative, got {budget}")
    if isinstance(cf, Lmsr):
        # LMSR is symmetric around q=0, so the short cap mirrors the long cap.
        return -max_long_shares(cf, fee, budget)
    if budget == 0:
        return 0.0
    q_plus = price_bounds(cf, fee).q_plus

    def shortfall(q: float) -> float:
        return budget + cf.cost(q_plus) - cf.cost(q) - (q_plus - q)

    lo = q_plus - 1.0
    while shortfall(lo) > 0:
        lo = q_plus - 2.0 * (q_plus - lo)
    return bisect_monotone(shortfall, lo, q_plus) - q_plus


def max_shares_infinite_liquidity(fee_rate: float, budget: float) -> float:
    """Position-magnitude cap when price never responds (or agents re-enter freely).

    With the marginal price pinned at its floor f/(1+f), a budget B buys at most
    B(1+f)/f shares; the short side is symmetric.
    """
    if budget < 0:
        raise ValueError(f"budget must be nonnegative, got {budget}")
    if not 0 < fee_rate < 1:
        raise ValueError(f"fee rate must lie in (0, 1), got {fee_rate}")
    return budget * (1.0 + fee_rate) / fee_rate
