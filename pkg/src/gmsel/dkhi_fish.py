"""The Dkhi and Fish tail functionals, their inverses, bounds and MC oracles.

For independent chi-square variables ``X_D`` and ``X_N``::

    Dkhi[D, N, x] = E[(X_D - x X_N / N)_+] / E[X_D]
    Fish[D, N, x] = E[(F_{D,N} - x)_+] / E[F_{D,N}]

Both are evaluated exactly through the Beta law of ``X_D / (X_D + X_N)``
in log space, so values far below the double-precision underflow limit
remain usable by the inversions ``edkhi`` and ``efish``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from . import _specfun
from .errors import DomainError
from .numerics import RngStream, log_fisher_sf, phi, solve_monotone

# Below this probability the inverse is replaced by the closed-form bound.
LOG_SMALL_Q = -500.0

__all__ = [
    "LOG_SMALL_Q",
    "dkhi",
    "dkhi_mc",
    "dkhi_two_term",
    "dkhi_upper",
    "dkhi_upper_terms",
    "edkhi",
    "efish",
    "fish",
    "fish_mc",
    "fish_two_term",
    "fish_upper",
    "fish_upper_terms",
    "log_dkhi",
    "log_fish",
]


def _check_dkhi(D, N, x):
    if not (D >= 1 and N >= 1):
        raise DomainError(f"Dkhi needs D >= 1 and N >= 1, got D={D}, N={N}")
    if not x >= 0:
        raise DomainError(f"Dkhi needs x >= 0, got {x}")


def _check_fish(D, N, x):
    if not D >= 1:
        raise DomainError(f"Fish needs D >= 1, got {D}")
    if not N >= 3:
        raise DomainError(f"Fish needs N >= 3 for a finite Fisher mean, got {N}")
    if not x >= 0:
        raise DomainError(f"Fish needs x >= 0, got {x}")


def log_dkhi(D: float, N: float, x: float) -> float:
    _check_dkhi(D, N, x)
    return min(0.0, _specfun.log_dkhi(float(D), float(N), float(x)))


def dkhi(D: float, N: float, x: float) -> float:
    """Dkhi[D, N, x], a decreasing map from [0, inf) onto (0, 1]."""
    return math.exp(log_dkhi(D, N, x))


def log_fish(D: float, N: float, x: float) -> float:
    _check_fish(D, N, x)
    return min(0.0, _specfun.log_fish(float(D), float(N), float(x)))


def fish(D: float, N: float, x: float) -> float:
    """Fish[D, N, x] for N >= 3."""
    return math.exp(log_fish(D, N, x))


def dkhi_two_term(D: float, N: float, x: float) -> float:
    """Direct difference of the two Fisher tails representing Dkhi.

    Exact in real arithmetic but subject to cancellation for large ``x``;
    kept as an independent cross-check of :func:`dkhi`.
    """
    _check_dkhi(D, N, x)
    first = math.exp(log_fisher_sf(D + 2, N, x / (D + 2)))
    second = (x / D) * math.exp(log_fisher_sf(D, N + 2, (N + 2) * x / (D * N)))
    return min(1.0, max(0.0, first - second))


def fish_two_term(D: float, N: float, x: float) -> float:
    """Direct difference of the two Fisher tails representing Fish."""
    _check_fish(D, N, x)
    first = math.exp(log_fisher_sf(D + 2, N - 2, (N - 2) * D * x / ((D + 2) * N)))
    second = x * (N - 2) / N * math.exp(log_fisher_sf(D, N, x))
    return min(1.0, max(0.0, first - second))


def _resolve_log_q(q, log_q):
    if log_q is None:
        if q is None:
            raise DomainError("one of q or log_q is required")
        if not q > 0:
            raise DomainError(f"q must be positive, got {q}")
        return math.log(q)
    if q is not None:
        raise DomainError("pass q or log_q, not both")
    if math.isnan(log_q):
        raise DomainError("log_q is NaN")
    return float(log_q)


def _initial_hint(D, rate, log_q):
    # the functionals decay like x^{-rate} for large x
    return max(1.0, float(D), math.exp(min(-log_q / rate, 700.0)))


def _log_dkhi_bound(D, N, x):
    # first line of the beta-form bound, valid for D >= 2 and x >= D
    return (
        -_specfun.ln_beta(0.5 * N, 1.0 + 0.5 * D)
        + 0.5 * N * math.log(N / (N + x))
        + 0.5 * D * math.log(x / (N + x))
        + math.log(2.0 * (2.0 * x + N * D))
        - math.log(N * (N + 2.0) * x)
    )


def _log_fish_bound(D, N, x):
    return (
        math.log(2.0)
        - _specfun.ln_beta(0.5 * D, 0.5 * N)
        + 0.5 * N * math.log(N / (N + D * x))
        + (0.5 * D - 1.0) * math.log(D * x / (N + D * x))
        + math.log(2.0 * x + N)
        - 2.0 * math.log(N)
    )


def edkhi(
    D: float,
    N: float,
    q: float | None = None,
    *,
    log_q: float | None = None,
    small_q_bound: bool = True,
) -> float:
    """Solve ``Dkhi[D, N, x] = q`` for x >= 0.

    ``q`` may be given through ``log_q`` when it underflows. For
    ``q < exp(-500)`` and ``D >= 2`` the returned value is the solution of
    the closed-form upper bound on Dkhi, hence an upper bound on the exact
    inverse; pass ``small_q_bound=False`` to solve the exact equation in
    that range as well.
    """
    lq = _resolve_log_q(q, log_q)
    if lq > 0.0:
        raise DomainError(f"EDkhi needs q in (0, 1], got exp({lq})")
    _check_dkhi(D, N, 0.0)
    if lq == 0.0:
        return 0.0
    D = float(D)
    N = float(N)
    hint = _initial_hint(D, 0.5 * N, lq)
    if small_q_bound and lq < LOG_SMALL_Q and D >= 2:
        return solve_monotone(
            lambda x: _log_dkhi_bound(D, N, x), lq, hint, lo=D, xtol=1e-15, ftol=1e-15
        )
    return solve_monotone(lambda x: _specfun.log_dkhi(D, N, x), lq, hint, xtol=1e-15, ftol=1e-15)


def efish(
    D: float,
    N: float,
    q: float | None = None,
    *,
    log_q: float | None = None,
    small_q_bound: bool = True,
) -> float:
    """Solve ``Fish[D, N, x] = q``; zero for ``q >= 1``.

    The small-``q`` strategy mirrors :func:`edkhi`, using the beta-form
    bound on Fish, which is valid for ``D >= 2`` and ``x >= N / (N - 2)``.
    """
    lq = _resolve_log_q(q, log_q)
    _check_fish(D, N, 0.0)
    if lq >= 0.0:
        return 0.0
    D = float(D)
    N = float(N)
    hint = _initial_hint(D, 0.5 * (N - 2.0), lq)
    if small_q_bound and lq < LOG_SMALL_Q and D >= 2:
        return solve_monotone(
            lambda x: _log_fish_bound(D, N, x), lq, hint, lo=N / (N - 2.0), xtol=1e-15, ftol=1e-15
        )
    return solve_monotone(lambda x: _specfun.log_fish(D, N, x), lq, hint, xtol=1e-15, ftol=1e-15)


def _psi(D, N, t):
    return phi(t) - D * (t - 1.0) ** 2 / (4.0 * (D + N + 2.0))


def dkhi_upper_terms(D: float, N: float, x: float) -> tuple[float, float, float]:
    """log of the three chained upper bounds on Dkhi, in display order."""
    if not D >= 2:
        raise DomainError(f"Dkhi bounds need D >= 2, got {D}")
    if not x >= D:
        raise DomainError(f"Dkhi bounds need x >= D, got x={x}, D={D}")
    _check_dkhi(D, N, x)
    D = float(D)
    N = float(N)
    t = (N + 2.0) * x / (N * D)
    log_factor = math.log1p(2.0 * x / (N * D))
    return (
        _log_dkhi_bound(D, N, x),
        log_factor + log_fisher_sf(D, N + 2.0, t),
        log_factor - D * _psi(D, N, t),
    )


def dkhi_upper(D: float, N: float, x: float) -> float:
    """Smallest of the analytic upper bounds on Dkhi (D >= 2, x >= D)."""
    return math.exp(min(dkhi_upper_terms(D, N, x)))


def fish_upper_terms(D: float, N: float, x: float) -> tuple[float, float]:
    if not D >= 2:
        raise DomainError(f"Fish bounds need D >= 2, got {D}")
    _check_fish(D, N, x)
    if not x >= N / (N - 2.0):
        raise DomainError(f"Fish bounds need x >= N/(N-2), got x={x}")
    D = float(D)
    N = float(N)
    return (
        _log_fish_bound(D, N, x),
        math.log1p(2.0 * x / N) + log_fisher_sf(D, N, x),
    )


def fish_upper(D: float, N: float, x: float) -> float:
    """Smallest of the analytic upper bounds on Fish (D >= 2, x >= N/(N-2))."""
    return math.exp(min(fish_upper_terms(D, N, x)))


# Monte Carlo oracles.  These go through scipy's incomplete gamma functions
# and never touch the Beta kernel above.

_CHUNK = 1_000_000


def _mean_and_se(total, total_sq, count):
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0) * count / (count - 1)
    return mean, math.sqrt(var / count)


def _chi2_excess(D, t):
    """E[(X_D - t)_+] for a chi-square X_D, vectorized over t >= 0."""
    half = np.asarray(0.5 * t, dtype=float)
    a = 0.5 * D
    # Q(a + 1, h) = Q(a, h) + h^a e^-h / Gamma(a + 1) saves a second incomplete gamma
    with np.errstate(divide="ignore"):
        term = np.exp(a * np.log(half) - half - math.lgamma(a + 1.0))
    return (D - t) * special.gammaincc(a, half) + D * term


def dkhi_mc(
    D: int,
    N: int,
    x: float,
    draws: int,
    stream: RngStream,
    *,
    method: str = "conditional",
) -> tuple[float, float]:
    """Monte Carlo estimate of Dkhi with its standard error.

    ``method="plain"`` averages ``(X_D - x X_N / N)_+ / D`` over paired
    draws. ``method="conditional"`` integrates ``X_D`` out analytically
    and averages ``E[(X_D - x X_N / N)_+ | X_N] / D`` over draws of
    ``X_N``; it is unbiased for the same quantity with smaller variance
    and stays informative far in the tail.
    """
    _check_dkhi(D, N, x)
    if draws < 2:
        raise DomainError("draws must be at least 2")
    if method not in ("plain", "conditional"):
        raise DomainError(f"unknown method {method!r}")
    gen = stream.generator()
    total = total_sq = 0.0
    left = draws
    while left > 0:
        m = min(left, _CHUNK)
        left -= m
        xn = gen.chisquare(N, m)
        if method == "plain":
            xd = gen.chisquare(D, m)
            vals = np.maximum(xd - x * xn / N, 0.0) / D
        else:
            vals = np.maximum(_chi2_excess(D, x * xn / N), 0.0) / D
        total += float(vals.sum())
        total_sq += float(np.dot(vals, vals))
    return _mean_and_se(total, total_sq, draws)


def _inverse_chi2_excess(N, a, x):
    """E[(a / X_N - x)_+] for a chi-square X_N with N >= 3, vectorized over a."""
    if x == 0.0:
        return a / (N - 2.0)
    z = np.asarray(a / (2.0 * x), dtype=float)
    s = 0.5 * N - 1.0
    # (a/(N-2)) P(X_{N-2} < a/x) - x P(X_N < a/x), with
    # P(s + 1, z) = P(s, z) - z^s e^-z / Gamma(s + 1)
    with np.errstate(divide="ignore"):
        term = np.exp(s * np.log(z) - z - math.lgamma(s + 1.0))
    return x * ((z / s - 1.0) * special.gammainc(s, z) + term)


def _fish_tilt(D, N, x):
    # the joint chi-square density along u = c v, c = x D / N, peaks at
    # v = (D + N - 4) / (1 + c); tilt X_D so that its mean lands at u = c v
    c = x * D / N
    u_star = c * max(D + N - 4.0, 1.0) / (1.0 + c)
    return max(1.0, u_star / D)


def fish_mc(
    D: int,
    N: int,
    x: float,
    draws: int,
    stream: RngStream,
    *,
    method: str = "conditional",
) -> tuple[float, float]:
    """Monte Carlo estimate of Fish with its standard error.

    The conditional estimator integrates ``X_N`` out given ``X_D``, which
    keeps a finite variance even for N = 3, where the Fisher variable
    itself has none. In the tail it also draws ``X_D`` from a scaled
    chi-square ``theta X_D`` and reweights by the likelihood ratio, with
    ``theta`` placing the proposal mean at the most likely point of the
    event ``F > x``; without this the estimate and its standard error are
    both unreliable once ``Fish`` drops below about ``1e-10``.
    """
    _check_fish(D, N, x)
    if draws < 2:
        raise DomainError("draws must be at least 2")
    if method not in ("plain", "conditional"):
        raise DomainError(f"unknown method {method!r}")
    gen = stream.generator()
    mean_f = N / (N - 2.0)
    theta = _fish_tilt(D, N, x) if method == "conditional" else 1.0
    total = total_sq = 0.0
    left = draws
    while left > 0:
        m = min(left, _CHUNK)
        left -= m
        xd = gen.chisquare(D, m)
        if method == "plain":
            xn = gen.chisquare(N, m)
            f = (xd / D) / (xn / N)
            vals = np.maximum(f - x, 0.0) / mean_f
        else:
            xd *= theta
            log_w = 0.5 * D * math.log(theta) - 0.5 * xd * (1.0 - 1.0 / theta)
            vals = np.maximum(_inverse_chi2_excess(N, N * xd / D, x), 0.0) * np.exp(log_w) / mean_f
        total += float(vals.sum())
        total_sq += float(np.dot(vals, vals))
    return _mean_and_se(total, total_sq, draws)
