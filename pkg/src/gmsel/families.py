"""Model collections, their weights and complexity indices.

Indices are 0-based throughout. A coordinate or column subset is a sorted
tuple of indices. A change-point set is a sorted tuple of positions
``i`` in ``1..n-1``, each meaning that a new segment starts at observation
``i``; the empty set is the constant model of dimension 1. A partition
model is a degree ``r`` with per-axis cell counts ``k``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import logsumexp

from .errors import BudgetExceededError, DomainError

__all__ = [
    "DYADIC_SIGMA_BOUND",
    "FAMILIES",
    "CollectionSpec",
    "ComplexityIndex",
    "ModelKey",
    "SigmaPrime",
    "complexity_of",
    "count_models",
    "dimension_counts",
    "enumerate_models",
    "log_binom",
    "partition_tuples",
    "sigma_prime",
    "sigma_prime_bruteforce",
    "weight_changepoint",
    "weight_dyadic",
    "weight_nonzero",
    "weight_partition",
    "weight_uniform",
    "weight_varsel",
]

FAMILIES = ("nonzero", "ordered", "complete", "changepoint", "partition", "dyadic")

_E = math.e
# closed-form upper bound on the weighted series of the dyadic-knot collection
DYADIC_SIGMA_BOUND = math.pi**2 * _E * (3 * _E - 2) / (6 * (_E - 1) ** 2)


def log_binom(n: int, k: int) -> float:
    """log C(n, k) via log-gamma; ``-inf`` outside ``0 <= k <= n``."""
    if k < 0 or k > n:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


@dataclass(frozen=True, order=False)
class ModelKey:
    """One model of a collection.

    Attributes
    ----------
    kind : str
        ``"coords"``, ``"columns"``, ``"changepoints"`` or ``"partition"``.
    indices : tuple of int
        Coordinates, columns or change-point positions (sorted, 0-based).
    r : int
        Polynomial degree (partition models only).
    k : tuple of int
        Cells per axis (partition models only).
    """

    kind: str
    indices: tuple[int, ...] = ()
    r: int = 0
    k: tuple[int, ...] = ()

    @classmethod
    def coords(cls, indices) -> "ModelKey":
        return cls("coords", tuple(sorted(int(i) for i in indices)))

    @classmethod
    def columns(cls, indices) -> "ModelKey":
        return cls("columns", tuple(sorted(int(i) for i in indices)))

    @classmethod
    def changepoints(cls, positions) -> "ModelKey":
        return cls("changepoints", tuple(sorted(int(i) for i in positions)))

    @classmethod
    def partition(cls, r: int, k) -> "ModelKey":
        return cls("partition", (), int(r), tuple(int(v) for v in k))

    @property
    def dim(self) -> int:
        """Nominal dimension D_m; projections report the effective rank."""
        if self.kind == "changepoints":
            return len(self.indices) + 1
        if self.kind == "partition":
            return (self.r + 1) ** len(self.k) * math.prod(self.k)
        return len(self.indices)

    @property
    def size(self) -> int:
        """Cardinality |m| used by the weight formulas."""
        return len(self.indices) if self.kind != "partition" else self.dim

    @property
    def lex(self) -> tuple:
        if self.kind == "partition":
            return (self.r,) + self.k
        return self.indices

    def sort_key(self) -> tuple:
        return (self.dim, self.lex)

    def __str__(self) -> str:
        if self.kind == "partition":
            return f"r={self.r} k=" + "x".join(str(v) for v in self.k)
        return "{" + ",".join(str(i) for i in self.indices) + "}"


@dataclass(frozen=True)
class ComplexityIndex:
    """Cap ``M exp(a D)`` on the number of models of dimension D."""

    M: float
    a: float


@dataclass(frozen=True)
class SigmaPrime:
    value: float
    upper_bound: bool = False


def weight_uniform(a_prime: float, D: int) -> float:
    if D < 0:
        raise DomainError("D must be non-negative")
    return a_prime * D


def weight_nonzero(D: int, n: int) -> float:
    """log C(n, D) + 2 log(D + 1)."""
    if not 0 <= D <= n:
        raise DomainError(f"need 0 <= D <= n, got D={D}, n={n}")
    return log_binom(n, D) + 2.0 * math.log(D + 1.0)


def weight_varsel(m_size: int, is_ordered_prefix: bool, c: float, N: int, p: int) -> float:
    """Weight for variable selection mixing ordered and complete subsets.

    Prefixes ``{0, ..., d-1}`` get ``c d``; any other subset of size ``D``
    gets ``log C(N, D) + log p + log(D + 1)``.
    """
    if not 0 <= m_size <= p:
        raise DomainError(f"need 0 <= |m| <= p, got {m_size}, p={p}")
    if is_ordered_prefix:
        if not c > 0:
            raise DomainError("c must be positive")
        return c * m_size
    return log_binom(N, m_size) + math.log(p) + math.log(m_size + 1.0)


def weight_changepoint(m_size: int, n: int) -> float:
    """log C(n-1, |m|) + 2 log(|m| + 2)."""
    if not 0 <= m_size <= n - 1:
        raise DomainError(f"need 0 <= |m| <= n - 1, got {m_size}")
    return log_binom(n - 1, m_size) + 2.0 * math.log(m_size + 2.0)


def weight_dyadic(j: int, q: int, p: int) -> float:
    """log C(2^j - 1, q) + q + 2 log j for the dyadic-knot spline collection."""
    if j < 1:
        raise DomainError("j must be at least 1")
    if not 0 <= q <= min(2**j - 1, p):
        raise DomainError(f"need 0 <= q <= min(2^j - 1, p), got q={q}")
    return log_binom(2**j - 1, q) + q + 2.0 * math.log(j)


def weight_partition(r: int, k, n: int | None = None) -> float:
    """(r + 1)^d k_1 ... k_d, the number of free coefficients."""
    k = tuple(k)
    if r < 0 or not k or min(k) < 1:
        raise DomainError("need r >= 0 and positive cell counts")
    value = (r + 1) ** len(k) * math.prod(k)
    if n is not None and value > n - 2:
        raise DomainError(f"(r+1)^d prod(k) = {value} exceeds n - 2 = {n - 2}")
    return float(value)


def partition_tuples(n: int, d: int, r_max: int = 2) -> list[tuple[int, tuple[int, ...]]]:
    """All ``(r, k)`` with ``r <= r_max`` and ``(r+1)^d prod(k) <= n - 2``."""
    if d < 1:
        raise DomainError("d must be positive")
    cap = n - 2
    out = []
    for r in range(r_max + 1):
        base = (r + 1) ** d
        if base > cap:
            break

        def grow(prefix, budget):
            if len(prefix) == d:
                out.append((r, tuple(prefix)))
                return
            for kk in range(1, budget + 1):
                grow(prefix + [kk], budget // kk)

        grow([], cap // base)
    out.sort(key=lambda t: ((t[0] + 1) ** d * math.prod(t[1]), (t[0],) + t[1]))
    return out


@dataclass(frozen=True)
class CollectionSpec:
    """A model family with its weights and search budget.

    Parameters
    ----------
    family : str
        One of ``nonzero``, ``ordered``, ``complete``, ``changepoint``,
        ``partition`` or ``dyadic``.
    n : int
        Number of observations.
    p : int
        Maximal size |m| (ignored for partitions).
    N : int, optional
        Number of candidate columns for ``ordered`` and ``complete``.
    d : int
        Dimension of the design points for ``partition``.
    r_max : int
        Largest polynomial degree for ``partition``.
    weights : str
        ``"canonical"`` for the family's own scheme, ``"uniform"`` for
        ``L = a' D``, or ``"mixed"`` (``complete`` only) for prefixes
        weighted ``c |m|`` and all other subsets by the complete scheme.
    a_prime : float, optional
        Slope of the uniform weights.
    c : float
        Prefix slope for ordered and mixed variable-selection weights.
    budget : int
        Maximal number of models an exhaustive search may visit.
    """

    family: str
    n: int
    p: int = 0
    N: int | None = None
    d: int = 1
    r_max: int = 2
    weights: str = "canonical"
    a_prime: float | None = None
    c: float = 1.0
    budget: int = 10_000_000

    def __post_init__(self):
        fam = self.family
        if fam not in FAMILIES:
            raise DomainError(f"unknown family {fam!r}")
        n, p = self.n, self.p
        if n < 3:
            raise DomainError("n must be at least 3")
        if self.budget <= 0:
            raise DomainError("budget must be positive")
        if self.weights not in ("canonical", "uniform", "mixed"):
            raise DomainError(f"unknown weight scheme {self.weights!r}")
        if self.weights == "uniform" and self.a_prime is None:
            raise DomainError("uniform weights need a_prime")
        if self.weights == "mixed" and fam != "complete":
            raise DomainError("mixed weights apply to the complete family only")
        if fam == "nonzero" and not 0 <= p <= n - 2:
            raise DomainError(f"nonzero family needs 0 <= p <= n - 2, got p={p}")
        if fam in ("ordered", "complete"):
            if self.N is None or self.N < 1:
                raise DomainError(f"{fam} family needs the number of columns N")
            if not 0 <= p <= min(self.N, n - 2):
                raise DomainError(f"{fam} family needs 0 <= p <= min(N, n - 2), got p={p}")
            if fam == "complete" and self.weights != "uniform" and p < 1:
                raise DomainError("complete weights need p >= 1")
        if fam == "changepoint" and not 0 <= p <= n - 3:
            raise DomainError(f"changepoint family needs 0 <= p <= n - 3, got p={p}")
        if fam == "partition" and (self.d < 1 or self.r_max < 0):
            raise DomainError("partition family needs d >= 1 and r_max >= 0")

    # weights -----------------------------------------------------------

    def weight(self, model: ModelKey) -> float:
        """L_m for one model of this collection."""
        fam = self.family
        if self.weights == "uniform":
            return weight_uniform(self.a_prime, model.dim)
        if fam == "nonzero":
            return weight_nonzero(model.size, self.n)
        if fam == "ordered":
            return weight_varsel(model.size, True, self.c, self.N, self.p)
        if fam == "complete":
            prefix = self.weights == "mixed" and model.indices == tuple(range(model.size))
            return weight_varsel(model.size, prefix, self.c, self.N, self.p)
        if fam == "changepoint":
            return weight_changepoint(model.size, self.n)
        if fam == "partition":
            return weight_partition(model.r, model.k)
        raise DomainError("the dyadic family has no enumerated models")

    def weight_by_size(self, size: int, prefix: bool = False) -> float:
        """Weight shared by all models of cardinality ``size``."""
        fam = self.family
        if self.weights == "uniform":
            dim = size + 1 if fam == "changepoint" else size
            return weight_uniform(self.a_prime, dim)
        if fam == "nonzero":
            return weight_nonzero(size, self.n)
        if fam == "ordered":
            return weight_varsel(size, True, self.c, self.N, self.p)
        if fam == "complete":
            return weight_varsel(size, prefix and self.weights == "mixed", self.c, self.N, self.p)
        if fam == "changepoint":
            return weight_changepoint(size, self.n)
        raise DomainError(f"weights of the {fam} family do not depend on size alone")


def _size_counts(spec: CollectionSpec):
    """(size, dim, log count, prefix flag) groups of equally weighted models."""
    fam, n, p = spec.family, spec.n, spec.p
    if fam == "nonzero":
        return [(D, D, log_binom(n, D), False) for D in range(p + 1)]
    if fam == "ordered":
        return [(D, D, 0.0, True) for D in range(p + 1)]
    if fam == "complete":
        groups = []
        for D in range(p + 1):
            if spec.weights == "mixed":
                groups.append((D, D, 0.0, True))
                if D >= 1 and log_binom(spec.N, D) > 0:
                    rest = math.log(math.comb(spec.N, D) - 1)
                    groups.append((D, D, rest, False))
            else:
                groups.append((D, D, log_binom(spec.N, D), False))
        return groups
    if fam == "changepoint":
        return [(q, q + 1, log_binom(n - 1, q), False) for q in range(p + 1)]
    raise DomainError(f"no size grouping for the {fam} family")


def count_models(spec: CollectionSpec) -> int:
    """Exact number of models in a finite collection."""
    fam = spec.family
    if fam == "dyadic":
        raise DomainError("the dyadic collection is infinite")
    if fam == "partition":
        return len(partition_tuples(spec.n, spec.d, spec.r_max))
    if fam == "nonzero":
        return sum(math.comb(spec.n, D) for D in range(spec.p + 1))
    if fam == "ordered":
        return spec.p + 1
    if fam == "complete":
        return sum(math.comb(spec.N, D) for D in range(spec.p + 1))
    return sum(math.comb(spec.n - 1, q) for q in range(spec.p + 1))


def enumerate_models(spec: CollectionSpec) -> Iterator[ModelKey]:
    """Yield every model once, by dimension and then lexicographically.

    Raises
    ------
    BudgetExceededError
        If the collection holds more models than ``spec.budget``.
    """
    total = count_models(spec)
    if total > spec.budget:
        raise BudgetExceededError(total, spec.budget)
    return _enumerate(spec)


def _enumerate(spec):
    fam = spec.family
    if fam == "partition":
        for r, k in partition_tuples(spec.n, spec.d, spec.r_max):
            yield ModelKey.partition(r, k)
    elif fam == "ordered":
        for D in range(spec.p + 1):
            yield ModelKey.columns(range(D))
    elif fam in ("nonzero", "complete"):
        pool = spec.n if fam == "nonzero" else spec.N
        make = ModelKey.coords if fam == "nonzero" else ModelKey.columns
        for D in range(spec.p + 1):
            for combo in itertools.combinations(range(pool), D):
                yield make(combo)
    else:
        for q in range(spec.p + 1):
            for combo in itertools.combinations(range(1, spec.n), q):
                yield ModelKey.changepoints(combo)


def sigma_prime(spec: CollectionSpec) -> SigmaPrime:
    """The weighted series ``sum_m (D_m + 1) exp(-L_m)``.

    Sums are grouped by dimension and accumulated in log space. For the
    dyadic family the closed-form upper bound is returned with
    ``upper_bound=True``.
    """
    fam = spec.family
    if fam == "dyadic":
        return SigmaPrime(DYADIC_SIGMA_BOUND, upper_bound=True)
    if fam == "partition":
        terms = []
        for r, k in partition_tuples(spec.n, spec.d, spec.r_max):
            m = ModelKey.partition(r, k)
            terms.append(math.log(m.dim + 1.0) - spec.weight(m))
        return SigmaPrime(float(math.exp(logsumexp(terms))))
    terms = []
    for size, dim, log_count, prefix in _size_counts(spec):
        L = spec.weight_by_size(size, prefix)
        terms.append(log_count + math.log(dim + 1.0) - L)
    return SigmaPrime(float(math.exp(logsumexp(terms))))


def sigma_prime_bruteforce(spec: CollectionSpec) -> float:
    """Per-model summation of the weighted series (small collections only)."""
    return math.fsum((m.dim + 1.0) * math.exp(-spec.weight(m)) for m in enumerate_models(spec))


def complexity_of(spec: CollectionSpec) -> ComplexityIndex:
    """A complexity index ``(M, a)`` for the family.

    Raises
    ------
    DomainError
        For the dyadic family, which has no finite complexity index.
    """
    fam = spec.family
    if fam == "nonzero":
        return ComplexityIndex(1.0, math.log(spec.n))
    if fam == "ordered":
        return ComplexityIndex(1.0, 0.0)
    if fam == "complete":
        return ComplexityIndex(1.0, math.log(spec.N))
    if fam == "changepoint":
        return ComplexityIndex(1.0, math.log(spec.n))
    if fam == "partition":
        return ComplexityIndex(1.0, float(spec.d))
    raise DomainError("the dyadic collection has no finite complexity index")


def dimension_counts(spec: CollectionSpec) -> dict[int, int]:
    """Number of models per nominal dimension."""
    counts: dict[int, int] = {}
    if spec.family == "partition":
        for r, k in partition_tuples(spec.n, spec.d, spec.r_max):
            D = ModelKey.partition(r, k).dim
            counts[D] = counts.get(D, 0) + 1
        return counts
    for size, dim, log_count, _ in _size_counts(spec):
        counts[dim] = counts.get(dim, 0) + int(round(math.exp(log_count)))
    return counts


def as_array(model: ModelKey, n: int) -> np.ndarray:
    """Boolean membership mask of a coordinate or column model."""
    mask = np.zeros(n, dtype=bool)
    mask[list(model.indices)] = True
    return mask
