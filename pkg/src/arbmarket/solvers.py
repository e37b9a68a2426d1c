"""Monotone root finding used by the cost-function inverses and fee calibration."""

from __future__ import annotations

from typing import Callable

REL_TOL = 1e-12
MAX_ITER = 200


def bisect_monotone(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    rel_tol: float = REL_TOL,
    max_iter: int = MAX_ITER,
) -> float:
    """Root of a monotone function on [lo, hi] by bisection.

    fn(lo) and fn(hi) must have opposite signs (zero endpoints are returned
    directly). All the equations solved in this package are strictly monotone,
    so bisection is preferred for robustness over faster bracketing methods.
    """
    f_lo = fn(lo)
    if f_lo == 0.0:
        return lo
    f_hi = fn(hi)
    if f_hi == 0.0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise ValueError(f"no sign change on [{lo}, {hi}]: fn(lo)={f_lo}, fn(hi)={f_hi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_hi > 0):
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
        if abs(hi - lo) <= rel_tol * max(1.0, abs(lo), abs(hi)):
            break
    return 0.5 * (lo + hi)


def expand_bracket(
    fn: Callable[[float], float],
    start: float = 0.0,
    step: float = 1.0,
    max_expansions: int = 200,
) -> tuple[float, float]:
    """Find [lo, hi] containing a sign change of fn by doubling outward from start."""
    f0 = fn(start)
    if f0 == 0.0:
        return start, start
    lo_inner = hi_inner = start
    width = step
    for _ in range(max_expansions):
        lo, hi = start - width, start + width
        if (fn(lo) > 0) != (f0 > 0):
            return lo, lo_inner
        if (fn(hi) > 0) != (f0 > 0):
            return hi_inner, hi
        lo_inner, hi_inner = lo, hi
        width *= 2.0
    raise ValueError("failed to bracket a sign change")
