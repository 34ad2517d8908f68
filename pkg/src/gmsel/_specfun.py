"""Scalar special-function kernels, evaluated in log space.

Every function here is numba-compatible. Arguments are plain floats; the
callers in :mod:`gmsel.numerics` and :mod:`gmsel.dkhi_fish` validate domains.
Complementary arguments (``x`` and ``y = 1 - x``) are passed separately so
that tails near 0 or 1 keep full relative precision.
"""

import math

from ._accel import jit

_EPS = 1e-16
_FPMIN = 1e-300
_MAXIT = 100000
_NEG_INF = -math.inf


@jit
def ln_beta(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


@jit
def log1mexp(x):
    """log(1 - exp(x)) for x <= 0."""
    if x > -0.6931471805599453:
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


@jit
def logaddexp(x, y):
    if x == _NEG_INF:
        return y
    if y == _NEG_INF:
        return x
    if x > y:
        return x + math.log1p(math.exp(y - x))
    return y + math.log1p(math.exp(x - y))


@jit
def _betacf(a, b, x):
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


@jit
def _log_betainc_direct(a, b, x, y):
    """log I_x(a, b) by continued fraction; accurate for x < (a+1)/(a+b+2)."""
    if x <= 0.0:
        return _NEG_INF
    front = a * math.log(x) + b * math.log(y) - math.log(a) - ln_beta(a, b)
    return front + math.log(_betacf(a, b, x))


@jit
def log_betainc(a, b, x, y):
    """log of the regularized incomplete beta I_x(a, b), with y = 1 - x."""
    if x <= 0.0:
        return _NEG_INF
    if y <= 0.0:
        return 0.0
    if x < (a + 1.0) / (a + b + 2.0):
        return _log_betainc_direct(a, b, x, y)
    return log1mexp(_log_betainc_direct(b, a, y, x))


@jit
def log_fisher_sf(d1, d2, x):
    """log P(F_{d1,d2} >= x)."""
    if x <= 0.0:
        return 0.0
    if math.isinf(x):
        return _NEG_INF
    den = d2 + d1 * x
    # F >= x  <=>  Beta(d2/2, d1/2) <= d2 / (d2 + d1 x)
    return log_betainc(0.5 * d2, 0.5 * d1, d2 / den, d1 * x / den)


@jit
def _log_gamma_series(a, x):
    # log P(a, x), lower regularized gamma, by power series
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAXIT):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return math.log(total) - x + a * math.log(x) - math.lgamma(a)


@jit
def _log_gamma_cf(a, x):
    # log Q(a, x), upper regularized gamma, by Lentz continued fraction
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAXIT + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.log(h) - x + a * math.log(x) - math.lgamma(a)


@jit
def log_gammaincc(a, x):
    """log Q(a, x), the upper regularized incomplete gamma function."""
    if x <= 0.0:
        return 0.0
    if math.isinf(x):
        return _NEG_INF
    if x < a + 1.0:
        return log1mexp(_log_gamma_series(a, x))
    return _log_gamma_cf(a, x)


@jit
def log_chisq_sf(k, x):
    return log_gammaincc(0.5 * k, 0.5 * x)


@jit
def log_beta_excess(a, b, c, d):
    """log E[(W - c)_+] for W ~ Beta(a, b), with d = 1 - c.

    Below the mean both terms of the closed form are non-negative. Above
    it, the hypergeometric expansion of the lower beta tail is rearranged
    into a series of positive terms, which removes the cancellation that
    the two-tail difference suffers far in the tail.
    """
    s = a + b
    if c <= 0.0:
        return math.log(a / s)
    if d <= 0.0:
        return _NEG_INF
    lb = ln_beta(a, b)
    log_density_part = a * math.log(c) + b * math.log(d) - math.log(s) - lb
    gap = (a * d - b * c) / s  # a/s - c without rounding in c
    if gap >= 0.0:
        log_upper = log_betainc(b, a, d, c)  # P(W > c)
        if gap == 0.0:
            return log_density_part
        return logaddexp(math.log(gap) + log_upper, log_density_part)
    ratio0 = d * s / (b + 1.0)
    if ratio0 <= 0.99:
        # E = d^b c^a / (b B) * sum_k u_k d (s + a k) / (s (b + 1 + k))
        total = 0.0
        u = 1.0
        k = 0
        while k < _MAXIT:
            term = u * d * (s + a * k) / (s * (b + 1.0 + k))
            total += term
            if term < total * 1e-17:
                break
            u *= d * (s + k) / (b + 1.0 + k)
            k += 1
        log_pref = b * math.log(d) + a * math.log(c) - math.log(b) - lb
        return log_pref + math.log(total)
    # just above the mean: the negative term is small relative to the density term
    log_upper = log_betainc(b, a, d, c)
    neg = math.log(-gap) + log_upper
    return log_density_part + log1mexp(neg - log_density_part)


@jit
def log_dkhi(D, N, x):
    """log Dkhi[D, N, x] through the Beta representation of X_D / (X_D + X_N)."""
    if x <= 0.0:
        return 0.0
    if math.isinf(x):
        return _NEG_INF
    den = N + x
    c = x / den
    d = N / den
    scale = math.log(D + N) - math.log(D) + math.log(den) - math.log(N)
    return scale + log_beta_excess(0.5 * D, 0.5 * N, c, d)


@jit
def log_fish(D, N, x):
    """log Fish[D, N, x] through the same representation with N - 2 df."""
    if x <= 0.0:
        return 0.0
    if math.isinf(x):
        return _NEG_INF
    den = N + D * x
    c = D * x / den
    d = N / den
    scale = math.log(D + N - 2.0) - math.log(D) + math.log(den) - math.log(N)
    return scale + log_beta_excess(0.5 * D, 0.5 * (N - 2.0), c, d)
