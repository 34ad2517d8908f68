"""Special functions, seeded random streams and monotone root finding."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _specfun
from .errors import DivergenceError, DomainError, NoSolutionError

__all__ = [
    "RngStream",
    "chisq_sf",
    "fisher_sf",
    "ln_beta",
    "log_chisq_sf",
    "log_fisher_sf",
    "phi",
    "sample_gaussian",
    "solve_monotone",
]


def ln_beta(a: float, b: float) -> float:
    """Natural log of the Euler beta function B(a, b)."""
    if not (a > 0 and b > 0):
        raise DomainError(f"ln_beta needs positive arguments, got ({a}, {b})")
    return _specfun.ln_beta(float(a), float(b))


def phi(x: float) -> float:
    """phi(x) = (x - 1 - log x) / 2, the Cramer transform of a chi-square."""
    if not x >= 1:
        raise DomainError(f"phi needs x >= 1, got {x}")
    return 0.5 * (x - 1.0 - math.log(x))


def _check_df(*dfs: float) -> None:
    for df in dfs:
        if not df >= 1:
            raise DomainError(f"degrees of freedom must be >= 1, got {df}")


def log_fisher_sf(d1: float, d2: float, x: float) -> float:
    """log P(F_{d1,d2} >= x), finite far below the double underflow limit."""
    _check_df(d1, d2)
    if not x >= 0:
        raise DomainError(f"fisher_sf needs x >= 0, got {x}")
    return _specfun.log_fisher_sf(float(d1), float(d2), float(x))


def fisher_sf(d1: float, d2: float, x: float) -> float:
    """Survival function of the Fisher distribution with (d1, d2) df."""
    return math.exp(log_fisher_sf(d1, d2, x))


def log_chisq_sf(k: float, x: float) -> float:
    _check_df(k)
    if not x >= 0:
        raise DomainError(f"chisq_sf needs x >= 0, got {x}")
    return _specfun.log_chisq_sf(float(k), float(x))


def chisq_sf(k: float, x: float) -> float:
    """Survival function of the chi-square distribution with k df."""
    return math.exp(log_chisq_sf(k, x))


def solve_monotone(
    f: Callable[[float], float],
    target: float,
    hi_hint: float = 1.0,
    *,
    lo: float = 0.0,
    ftol: float = 1e-12,
    xtol: float = 1e-9,
    maxiter: int = 400,
) -> float:
    """Solve ``f(x) = target`` for a continuous, strictly decreasing ``f``.

    The bracket is grown by doubling from ``hi_hint`` and then shrunk by
    secant steps, falling back to bisection whenever a secant step leaves
    the bracket or fails to halve it over two iterations.

    Parameters
    ----------
    f : callable
        Decreasing function on ``[lo, inf)``.
    target : float
        Value to reach; must satisfy ``f(lo) >= target``.
    hi_hint : float
        Initial upper end of the bracket.
    lo : float
        Left end of the search domain.
    ftol, xtol : float
        Stop when ``|f(x) - target| <= ftol * |target|`` or when the bracket
        width is at most ``xtol * (1 + x)``.

    Raises
    ------
    NoSolutionError
        If ``target > f(lo)``.
    DivergenceError
        If no bracket is found below ``2**60 * hi_hint`` or below the
        largest finite double.
    """
    f_lo = f(lo)
    if target > f_lo:
        raise NoSolutionError(f"target {target} exceeds f({lo}) = {f_lo}")
    if f_lo == target:
        return lo
    if not hi_hint > 0:
        raise DomainError("hi_hint must be positive")

    step = float(hi_hint)
    limit = step * 2.0**60
    hi = lo + step
    f_hi = f(hi)
    while f_hi > target:
        lo, f_lo = hi, f_hi
        step *= 2.0
        if step > limit:
            raise DivergenceError(f"no bracket for target {target} below {lo + step}")
        hi = lo + step
        if not math.isfinite(hi):
            raise DivergenceError(f"the solution for target {target} exceeds the floating-point range")
        f_hi = f(hi)
    if f_hi == target:
        return hi

    a, fa = lo, f_lo - target
    b, fb = hi, f_hi - target
    x = 0.5 * (a + b)
    prev_width = math.inf
    for _ in range(maxiter):
        width = b - a
        use_bisect = width > 0.5 * prev_width
        x = math.nan
        if not use_bisect and math.isfinite(fa) and math.isfinite(fb) and fa != fb:
            x = b - fb * (b - a) / (fb - fa)
        if not (a < x < b):
            x = a + 0.5 * width
        prev_width = width
        fx = f(x) - target
        if abs(fx) <= ftol * abs(target) or fx == 0.0:
            return x
        if fx > 0:
            a, fa = x, fx
        else:
            b, fb = x, fx
        if b - a <= xtol * (1.0 + abs(x)) or not (a < 0.5 * (a + b) < b):
            return x
    return x


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by ``(master_seed, stream_index)``.

    Each call to :meth:`generator` returns a fresh generator positioned at
    the start of the stream, so the same pair always reproduces the same
    draws regardless of scheduling.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise DomainError("master_seed must fit in 64 unsigned bits")
        if not 0 <= self.stream_index < 2**64:
            raise DomainError("stream_index must fit in 64 unsigned bits")

    def generator(self) -> np.random.Generator:
        key = (self.stream_index << 64) | self.master_seed
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "RngStream":
        """Stream for sub-task ``index`` of this stream (distinct key)."""
        mixed = np.random.SeedSequence([self.master_seed, self.stream_index, index])
        return RngStream(int(mixed.generate_state(1, np.uint64)[0]), index)


def sample_gaussian(stream: RngStream, count: int) -> np.ndarray:
    """``count`` i.i.d. standard normal draws from the start of ``stream``."""
    if count < 0:
        raise DomainError("count must be non-negative")
    return stream.generator().standard_normal(count)
