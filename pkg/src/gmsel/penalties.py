"""Penalty rules for the penalized least-squares criteria.

Two penalty scales are in use. ``pen`` multiplies the residual sum of
squares as ``rss * (1 + pen / (n - D))``; ``pen'`` is added to the
log-likelihood form ``n/2 log(rss/n) + pen'/2``. :func:`pen_convert` maps
one onto the other so that both criteria select the same model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

from .dkhi_fish import edkhi, efish
from .errors import DomainError
from .numerics import phi, solve_monotone

__all__ = [
    "CLASSICAL_KINDS",
    "HkaReport",
    "PenaltyRule",
    "hka_check",
    "pen_classical",
    "pen_convert",
    "pen_kl",
    "pen_kl_upper",
    "pen_kullback",
    "pen_kullback_upper",
    "pen_minimal",
    "phi",
    "phi_inv",
]

CLASSICAL_KINDS = ("fpe", "aic", "bic", "amdl")


def phi_inv(a: float) -> float:
    """Inverse of :func:`phi` on ``[1, inf)``."""
    if not a >= 0:
        raise DomainError(f"phi_inv needs a >= 0, got {a}")
    if a == 0:
        return 1.0
    # phi(1 + s) is increasing in s; solve -phi(1 + s) = -a on s >= 0
    s = solve_monotone(lambda s: -phi(1.0 + s), -a, hi_hint=max(1.0, 2.0 * a), xtol=1e-15)
    return 1.0 + s


def _exp(x):
    # the closed-form bounds become vacuous (infinite) for huge weights
    return math.exp(x) if x < 709.0 else math.inf


def _scaled_square(factor, bracket):
    if bracket > 1e150:
        return math.inf
    return factor * bracket * bracket


def _check_K(K, name="K", allow_one=False):
    if allow_one and K == 1:
        return
    if not K > 1:
        raise DomainError(f"{name} must exceed 1, got {K}")


def _check_L(L):
    if not L >= 0:
        raise DomainError(f"weights must be non-negative, got L={L}")


@lru_cache(maxsize=65536)
def _edkhi_cached(D: int, N: int, L: float) -> float:
    return edkhi(D, N, log_q=-L)


@lru_cache(maxsize=65536)
def _efish_cached(D: int, N: int, L: float) -> float:
    return efish(D, N, log_q=-L)


def pen_kl(K: float, L: float, D: int, n: int) -> float:
    """Data-driven penalty ``K N/(N-1) EDkhi[D+1, N-1, exp(-L)]``, N = n - D.

    Parameters
    ----------
    K : float
        Leading constant, ``K >= 1``. The risk guarantee needs ``K > 1``;
        ``K = 1`` is accepted as the boundary case for comparisons.
    L : float
        Weight of the model; ``exp(-L)`` is handled in log space so weights
        in the thousands are fine.
    D : int
        Model dimension.
    n : int
        Sample size; requires ``n - D >= 2``.
    """
    _check_K(K, allow_one=True)
    _check_L(L)
    N = n - D
    if D < 0 or N < 2:
        raise DomainError(f"pen_kl needs D >= 0 and n - D >= 2, got D={D}, n={n}")
    if L == 0:
        return 0.0
    return K * N / (N - 1.0) * _edkhi_cached(D + 1, N - 1, float(L))


def pen_kl_upper(K: float, L: float, D: int, n: int) -> float:
    """Closed-form upper bound on :func:`pen_kl`.

    For ``D >= 1`` this needs ``n - D >= 7``; for ``D = 0`` it needs
    ``n >= 4`` and uses the dedicated zero-dimension form.
    """
    _check_K(K)
    _check_L(L)
    Nm = n - D
    if D < 0:
        raise DomainError(f"D must be non-negative, got {D}")
    if D == 0:
        if Nm < 4:
            raise DomainError(f"the D = 0 bound needs n >= 4, got n={n}")
        N = Nm - 1.0
        bracket = 1.0 + _exp(2.0 * L / N) * math.sqrt((1.0 + 6.0 / N) * 2.0 * L / 3.0)
        return _scaled_square(3.0 * K * (N + 1.0) / N, bracket)
    if Nm < 7:
        raise DomainError(f"the bound needs n - D >= 7, got {Nm}")
    Dp = D + 1.0
    N = Nm - 1.0
    delta = (L + math.log(5.0) + 1.0 / N) / (1.0 - 5.0 / N)
    bracket = 1.0 + _exp(2.0 * delta / (N + 2.0)) * math.sqrt(
        (1.0 + 2.0 * Dp / (N + 2.0)) * 2.0 * delta / Dp
    )
    return _scaled_square(K * (N + 1.0) / N * Dp, bracket)


def pen_classical(kind: str, D: int, n: int) -> float:
    """Classical penalties on the ``pen`` scale: FPE, AIC, BIC or AMDL."""
    kind = kind.lower()
    if not 0 <= D <= n - 1:
        raise DomainError(f"need 0 <= D <= n - 1, got D={D}, n={n}")
    if kind == "fpe":
        return 2.0 * D
    if kind == "aic":
        return (n - D) * math.expm1(2.0 * D / n)
    if kind == "bic":
        return (n - D) * math.expm1(D * math.log(n) / n)
    if kind == "amdl":
        return (n - D) * math.expm1(3.0 * D * math.log(n) / n)
    raise DomainError(f"unknown classical penalty {kind!r}")


def pen_convert(pen: float, D: int, n: int, direction: str = "to_prime") -> float:
    """Map ``pen`` to ``pen' = n log(1 + pen/(n-D))`` or back.

    ``direction`` is ``"to_prime"`` or ``"from_prime"``.
    """
    if not n > D:
        raise DomainError(f"pen_convert needs n > D, got n={n}, D={D}")
    N = n - D
    if direction == "to_prime":
        return n * math.log1p(pen / N)
    if direction == "from_prime":
        return N * math.expm1(pen / n)
    raise DomainError(f"unknown direction {direction!r}")


def pen_minimal(K: float, a: float, D: int) -> float:
    """Threshold ``K^2 phi^{-1}(a) D`` below which selection overfits."""
    if D < 0:
        raise DomainError(f"D must be non-negative, got {D}")
    return K * K * phi_inv(a) * D


@dataclass(frozen=True)
class HkaReport:
    """Feasibility of the dimension cap attached to a complexity index."""

    feasible: bool
    t: float
    gamma1: float
    gamma2: float
    d_max: int
    requested: int
    residual_constant: float


def hka_check(K: float, M: float, a: float, n: int, D_max_requested: int) -> HkaReport:
    """Evaluate the dimension cap implied by a complexity index ``(M, a)``.

    ``residual_constant`` is diagnostic only. When ``t = K phi^{-1}(a)``
    is at most 1 the report is infeasible rather than an error.
    """
    if n < 1:
        raise DomainError("n must be positive")
    _check_K(K)
    t = K * phi_inv(a)
    if t <= 1.0:
        return HkaReport(False, t, math.inf, 0.0, 0, D_max_requested, math.inf)
    gamma1 = max(2.0 * t, (t + 1.0) / (t - 1.0))
    gamma2 = 2.0 * phi(K) / (t - 1.0) ** 2
    d_max = min(
        math.floor(max(n - gamma1, 0.0)),
        math.floor(max((n + 2.0) * gamma2 - 1.0, 0.0)),
    )
    ratio = K / (K - 1.0)
    residual = ratio * (
        K * K * phi_inv(a) + 2.0 * K + 8.0 * K * M * math.exp(-a) / math.expm1(phi(K) / 2.0) ** 2
    )
    return HkaReport(
        feasible=D_max_requested <= d_max,
        t=t,
        gamma1=gamma1,
        gamma2=gamma2,
        d_max=int(d_max),
        requested=D_max_requested,
        residual_constant=residual,
    )


def _check_kullback_constants(K1, K2):
    _check_K(K1, "K1")
    if not K2 >= K1:
        raise DomainError(f"need K2 >= K1, got K1={K1}, K2={K2}")


def pen_kullback(K1: float, K2: float, L: float, D: int, n: int) -> float:
    """Penalty for the Kullback-loss criterion ``n/2 log(rss/N) + pen/2``.

    Needs ``n - D >= 4`` so that the Fisher functional has ``N - 1 >= 3``
    denominator degrees of freedom.
    """
    _check_kullback_constants(K1, K2)
    _check_L(L)
    Nm = n - D
    if D < 0 or Nm < 4:
        raise DomainError(f"pen_kullback needs D >= 0 and n - D >= 4, got D={D}, n={n}")
    inner = K1 * (D + 1.0) * Nm / (Nm - 1.0) * _efish_cached(D + 1, Nm - 1, float(L)) - D
    return K2 / (K2 - 1.0) * max(inner, 0.0)


def pen_kullback_upper(K1: float, K2: float, L: float, D: int, n: int) -> float:
    """Closed-form upper bound on :func:`pen_kullback` (D >= 1, n - D >= 9)."""
    _check_kullback_constants(K1, K2)
    _check_L(L)
    Nm = n - D
    if D < 1:
        raise DomainError(f"the Kullback bound needs D >= 1, got {D}")
    if Nm < 9:
        raise DomainError(f"the Kullback bound needs n - D >= 9, got {Nm}")
    Dp = D + 1.0
    N = Nm - 1.0
    delta = (L + math.log(5.0) + 1.0 / (N - 2.0)) / (1.0 - 5.0 / (N - 2.0))
    bracket = 1.0 + _exp(2.0 * delta / N) * math.sqrt((1.0 + 2.0 * Dp / N) * 2.0 * delta / Dp)
    return _scaled_square(K1 * K2 / (K2 - 1.0) * (N + 1.0) / (N - 2.0) * Dp, bracket)


@dataclass(frozen=True)
class PenaltyRule:
    """A named penalty rule mapping ``(D, L, n)`` to a penalty value.

    ``kind`` is one of ``"kl"``, ``"fpe"``, ``"aic"``, ``"bic"``, ``"amdl"``,
    ``"minimal"``, ``"kullback"`` or ``"table"``. Values are on the ``pen``
    scale of the multiplicative criterion, except for ``"kullback"`` whose
    values belong to the Kullback-loss criterion.
    """

    kind: str
    K: float = 1.1
    a: float = 0.0
    K1: float = 1.1
    K2: float | None = None
    table: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind == "kl":
            _check_K(self.K, allow_one=True)
        elif kind == "minimal":
            _check_K(self.K)
        elif kind == "kullback":
            if self.K2 is None:
                object.__setattr__(self, "K2", self.K1 + 1.0)
            _check_kullback_constants(self.K1, self.K2)
        elif kind == "table":
            object.__setattr__(self, "table", dict(self.table))
        elif kind not in CLASSICAL_KINDS:
            raise DomainError(f"unknown penalty kind {self.kind!r}")

    @classmethod
    def kl(cls, K: float = 1.1) -> "PenaltyRule":
        return cls("kl", K=K)

    @classmethod
    def classical(cls, kind: str) -> "PenaltyRule":
        return cls(kind)

    @classmethod
    def minimal(cls, K: float, a: float) -> "PenaltyRule":
        return cls("minimal", K=K, a=a)

    @classmethod
    def kullback(cls, K1: float = 1.1, K2: float | None = None) -> "PenaltyRule":
        return cls("kullback", K1=K1, K2=K2)

    @classmethod
    def from_table(cls, table: Mapping[int, float]) -> "PenaltyRule":
        return cls("table", table=table)

    @property
    def uses_weights(self) -> bool:
        return self.kind in ("kl", "kullback")

    @property
    def label(self) -> str:
        if self.kind == "kl":
            return f"K={self.K:g}"
        if self.kind == "kullback":
            return f"Kullback K1={self.K1:g} K2={self.K2:g}"
        if self.kind == "minimal":
            return f"minimal K={self.K:g} a={self.a:g}"
        return self.kind.upper()

    def __call__(self, D: int, L: float, n: int) -> float:
        """Penalty for a model of dimension ``D`` and weight ``L``."""
        kind = self.kind
        if kind == "kl":
            return pen_kl(self.K, L, D, n)
        if kind == "kullback":
            return pen_kullback(self.K1, self.K2, L, D, n)
        if kind == "minimal":
            return pen_minimal(self.K, self.a, D)
        if kind == "table":
            try:
                return float(self.table[D])
            except KeyError:
                raise DomainError(f"penalty table has no entry for D={D}") from None
        return pen_classical(kind, D, n)

    def __hash__(self):
        return hash((self.kind, self.K, self.a, self.K1, self.K2, tuple(sorted(self.table.items()))))
