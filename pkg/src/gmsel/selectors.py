"""Minimization of the penalized criteria over model collections.

Every selector returns the exact minimizer over its collection. Ties on
the criterion value go to the smaller dimension and then to the
lexicographically smaller model key. ``select_generic`` evaluates an
explicit model list and serves as the reference for the specialized
selectors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from ._kernels import changepoint_dp, subset_search
from .errors import BudgetExceededError, DomainError, SaturatedFitError
from .estimation import RSS_FLOOR, FitRecord, crit_K, crit_K_kullback, crit_L, project
from .families import CollectionSpec, ModelKey, count_models, enumerate_models
from .penalties import PenaltyRule, pen_convert

__all__ = [
    "CRITERIA",
    "SelectionOutcome",
    "TraceRow",
    "criterion_value",
    "prefix_rss",
    "select_changepoints",
    "select_complete",
    "select_complete_many",
    "select_generic",
    "select_in_collection",
    "select_nonzero",
    "select_ordered",
    "select_partition",
]

CRITERIA = ("L", "K", "kullback")


@dataclass(frozen=True)
class TraceRow:
    """Best model of one dimension: its rss, penalty and criterion value."""

    D: int
    rss: float
    penalty: float
    criterion: float


@dataclass
class SelectionOutcome:
    """Result of a selection run.

    Attributes
    ----------
    m_hat : ModelKey
        Selected model.
    fit : FitRecord
        Projection of the response onto ``m_hat``.
    criterion_value : float
        Criterion of ``m_hat`` recomputed from ``fit``.
    penalty : float
        Penalty of ``m_hat`` on the scale of the criterion used.
    criterion : str
        ``"L"``, ``"K"`` or ``"kullback"``.
    trace : list of TraceRow
        Best model per dimension, sorted by dimension.
    evaluated : int
        Number of models whose criterion was evaluated.
    """

    m_hat: ModelKey
    fit: FitRecord
    criterion_value: float
    penalty: float
    criterion: str
    trace: list[TraceRow] = field(default_factory=list)
    evaluated: int = 0

    @property
    def dim(self) -> int:
        return self.fit.dim

    @property
    def sigma2_hat(self) -> float:
        return self.fit.sigma2_hat


WeightSource = CollectionSpec | Callable[[ModelKey], float] | Mapping[ModelKey, float] | None


def _weight_fn(weights: WeightSource) -> Callable[[ModelKey], float]:
    if weights is None:
        return lambda m: 0.0
    if isinstance(weights, CollectionSpec):
        return weights.weight
    if isinstance(weights, Mapping):
        return lambda m: float(weights[m])
    return weights


def _resolve_criterion(rule: PenaltyRule, criterion: str | None) -> str:
    if criterion is None:
        criterion = "kullback" if rule.kind == "kullback" else "L"
    if criterion not in CRITERIA:
        raise DomainError(f"unknown criterion {criterion!r}")
    if (criterion == "kullback") != (rule.kind == "kullback"):
        raise DomainError("the Kullback criterion goes with the Kullback penalty only")
    return criterion


def _penalty(rule, criterion, D, L, n):
    pen = rule(D, L, n)
    if criterion == "K":
        return pen_convert(pen, D, n)
    return pen


def _crit_from_rss(criterion, rss, pen, D, n):
    """Criterion from an rss value; ``None`` when the fit is saturated."""
    N = n - D
    if criterion == "L":
        return rss * (1.0 + pen / N)
    if rss < RSS_FLOOR:
        return None
    if criterion == "K":
        return 0.5 * n * (math.log(rss) - math.log(n)) + 0.5 * pen
    return 0.5 * n * (math.log(rss) - math.log(N)) + 0.5 * pen


def criterion_value(fit: FitRecord, pen: float, criterion: str) -> float:
    """Criterion of a fit given a penalty on that criterion's scale."""
    if criterion == "L":
        return crit_L(fit, pen)
    if criterion == "K":
        return crit_K(fit, pen)
    return crit_K_kullback(fit, pen)


@dataclass
class _Candidate:
    crit: float | None  # None marks a saturated fit under a log criterion
    D: int
    lex: tuple
    model: ModelKey
    rss: float
    pen: float

    def key(self):
        return (self.crit, self.D, self.lex)


def _choose(cands: Sequence[_Candidate]) -> _Candidate:
    live = [c for c in cands if c.crit is not None]
    if not live:
        warnings.warn(
            "every candidate fit is saturated; selecting among saturated models",
            RuntimeWarning,
            stacklevel=3,
        )
        return min(cands, key=lambda c: (c.D, c.lex))
    return min(live, key=_Candidate.key)


def _trace(cands: Iterable[_Candidate]) -> list[TraceRow]:
    best: dict[int, _Candidate] = {}
    for c in cands:
        if c.crit is None:
            continue
        cur = best.get(c.D)
        if cur is None or c.key() < cur.key():
            best[c.D] = c
    return [TraceRow(D, c.rss, c.pen, c.crit) for D, c in sorted(best.items())]


def _finish(y, winner, cands, criterion, design, evaluated) -> SelectionOutcome:
    fit = project(y, winner.model, design)
    try:
        value = criterion_value(fit, winner.pen, criterion)
    except SaturatedFitError:
        value = -math.inf
    return SelectionOutcome(
        m_hat=winner.model,
        fit=fit,
        criterion_value=value,
        penalty=winner.pen,
        criterion=criterion,
        trace=_trace(cands),
        evaluated=evaluated,
    )


def select_generic(
    y,
    models: Iterable[ModelKey],
    rule: PenaltyRule,
    weights: WeightSource = None,
    criterion: str | None = None,
    design=None,
) -> SelectionOutcome:
    """Exact minimizer over an explicit list of models.

    Parameters
    ----------
    y : array_like, shape (n,)
    models : iterable of ModelKey
        Evaluated once each.
    rule : PenaltyRule
    weights : CollectionSpec, callable, mapping or None
        Source of the weights ``L_m``; only needed by weighted rules.
    criterion : {"L", "K", "kullback"}, optional
        Defaults to ``"kullback"`` for the Kullback rule and ``"L"``
        otherwise.
    design : array_like, optional
        Column matrix or design points, as required by the models.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    criterion = _resolve_criterion(rule, criterion)
    weight = _weight_fn(weights)
    cands = []
    for m in models:
        fit = project(y, m, design)
        D = fit.dim
        pen = _penalty(rule, criterion, D, weight(m), n)
        cands.append(_Candidate(_crit_from_rss(criterion, fit.rss, pen, D, n), D, m.lex, m, fit.rss, pen))
    if not cands:
        raise DomainError("the model list is empty")
    return _finish(y, _choose(cands), cands, criterion, design, len(cands))


def _size_spec(spec, family, **kw):
    if spec is None:
        return CollectionSpec(family, **kw)
    if spec.family != family:
        raise DomainError(f"expected a {family} collection, got {spec.family}")
    return spec


def select_nonzero(
    y,
    p: int,
    rule: PenaltyRule,
    spec: CollectionSpec | None = None,
    criterion: str | None = None,
) -> SelectionOutcome:
    """Nonzero mean components: keep the ``D`` largest ``|y_i|``.

    For every ``D <= p`` the best subset of size ``D`` keeps the largest
    squared observations (ties toward the lower index), so only ``p + 1``
    candidates are compared.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    spec = _size_spec(spec, "nonzero", n=n, p=p)
    if spec.p != p or spec.n != n:
        raise DomainError("spec does not match y and p")
    criterion = _resolve_criterion(rule, criterion)
    y2 = y * y
    order = np.argsort(-y2, kind="stable")
    sorted_sq = y2[order]
    suffix = np.concatenate((np.cumsum(sorted_sq[::-1])[::-1], [0.0]))
    cands = []
    for D in range(p + 1):
        model = ModelKey.coords(order[:D])
        rss = float(suffix[D])
        pen = _penalty(rule, criterion, D, spec.weight_by_size(D), n)
        cands.append(_Candidate(_crit_from_rss(criterion, rss, pen, D, n), D, model.lex, model, rss, pen))
    return _finish(y, _choose(cands), cands, criterion, None, len(cands))


def prefix_rss(y, X, p: int, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """rss and rank of the nested prefixes ``X[:, :d]`` for ``d = 0..p``.

    One pass of twice-applied Gram-Schmidt; a column adding less than
    ``tol`` relative norm leaves the rank unchanged.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    resid = y.copy()
    Q = []
    rss = [float(resid @ resid)]
    ranks = [0]
    for j in range(p):
        v = X[:, j].copy()
        norm0 = float(v @ v)
        for _ in range(2):
            for q in Q:
                v -= (q @ v) * q
        nv = float(v @ v)
        if norm0 > 0 and nv > tol * tol * norm0:
            q = v / math.sqrt(nv)
            Q.append(q)
            resid -= (q @ resid) * q
        rss.append(float(resid @ resid))
        ranks.append(len(Q))
    return np.array(rss), np.array(ranks)


def _check_design(y, X, p):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DomainError(f"design must have shape ({y.shape[0]}, N)")
    n, N = X.shape
    if not 0 <= p <= min(N, n - 2):
        raise DomainError(f"need 0 <= p <= min(N, n - 2), got p={p}")
    return X


def select_ordered(
    y,
    X,
    p: int,
    rule: PenaltyRule,
    spec: CollectionSpec | None = None,
    criterion: str | None = None,
) -> SelectionOutcome:
    """Ordered variable selection over the prefixes of the columns of ``X``."""
    y = np.asarray(y, dtype=float)
    X = _check_design(y, X, p)
    n, N = X.shape
    spec = _size_spec(spec, "ordered", n=n, p=p, N=N)
    criterion = _resolve_criterion(rule, criterion)
    rss, ranks = prefix_rss(y, X, p)
    cands = []
    for d in range(p + 1):
        model = ModelKey.columns(range(d))
        D = int(ranks[d])
        pen = _penalty(rule, criterion, D, spec.weight(model), n)
        cands.append(_Candidate(_crit_from_rss(criterion, rss[d], pen, D, n), D, model.lex, model, float(rss[d]), pen))
    return _finish(y, _choose(cands), cands, criterion, X, len(cands))


def _mask_to_tuple(mask: int) -> tuple[int, ...]:
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return tuple(out)


def select_complete_many(
    Y,
    X,
    p: int,
    rule: PenaltyRule,
    spec: CollectionSpec | None = None,
    criterion: str | None = None,
    budget: int | None = None,
) -> list[SelectionOutcome]:
    """Exhaustive subset selection for each column of ``Y``.

    The enumeration and the orthogonalization of the candidate columns are
    shared by all responses.

    Raises
    ------
    BudgetExceededError
        If the number of subsets exceeds the budget.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    X = _check_design(Y[:, 0], X, p)
    n, N = X.shape
    if spec is None:
        spec = CollectionSpec("complete", n=n, p=p, N=N, budget=budget or 10_000_000)
    elif spec.family != "complete":
        raise DomainError(f"expected a complete collection, got {spec.family}")
    total = count_models(spec)
    limit = spec.budget if budget is None else budget
    if total > limit:
        raise BudgetExceededError(total, limit)
    criterion = _resolve_criterion(rule, criterion)
    mixed = spec.weights == "mixed"
    best_rss, best_mask = subset_search(X, Y, p, exclude_prefix=mixed)
    # penalties depend on (size, rank) only
    cells = []
    for size in range(p + 1):
        L = spec.weight_by_size(size)
        for rank in range(size + 1):
            if np.isfinite(best_rss[size, rank]).any():
                cells.append((size, rank, _penalty(rule, criterion, rank, L, n)))
    prefix_pen = []
    if mixed:
        for size in range(p + 1):
            prefix_pen.append(spec.weight_by_size(size, prefix=True))
    outcomes = []
    for k in range(Y.shape[1]):
        y = Y[:, k]
        cands = []
        for size, rank, pen in cells:
            rss = float(best_rss[size, rank, k])
            if not np.isfinite(rss):
                continue
            model = ModelKey.columns(_mask_to_tuple(int(best_mask[size, rank, k])))
            cands.append(_Candidate(_crit_from_rss(criterion, rss, pen, rank, n), rank, model.lex, model, rss, pen))
        if mixed:
            rss_p, ranks = prefix_rss(y, X, p)
            for d in range(p + 1):
                D = int(ranks[d])
                pen = _penalty(rule, criterion, D, prefix_pen[d], n)
                model = ModelKey.columns(range(d))
                cands.append(_Candidate(_crit_from_rss(criterion, rss_p[d], pen, D, n), D, model.lex, model, float(rss_p[d]), pen))
        outcomes.append(_finish(y, _choose(cands), cands, criterion, X, total))
    return outcomes


def select_complete(
    y,
    X,
    p: int,
    rule: PenaltyRule,
    spec: CollectionSpec | None = None,
    criterion: str | None = None,
    budget: int | None = None,
) -> SelectionOutcome:
    """Exhaustive best-subset selection among all subsets of size ``<= p``."""
    y = np.asarray(y, dtype=float)
    return select_complete_many(y[:, None], X, p, rule, spec, criterion, budget)[0]


def select_changepoints(
    y,
    p: int,
    rule: PenaltyRule,
    spec: CollectionSpec | None = None,
    criterion: str | None = None,
) -> SelectionOutcome:
    """Piecewise-constant fit with at most ``p`` change points.

    The weights depend on the number of change points only, so the
    segmentation dynamic program, which gives the smallest rss for each
    count, yields the exact minimizer.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if not 0 <= p <= n - 3:
        raise DomainError(f"need 0 <= p <= n - 3, got p={p}")
    spec = _size_spec(spec, "changepoint", n=n, p=p)
    criterion = _resolve_criterion(rule, criterion)
    rss, sets = changepoint_dp(y, p)
    cands = []
    for q in range(p + 1):
        model = ModelKey.changepoints(sets[q])
        D = q + 1
        pen = _penalty(rule, criterion, D, spec.weight_by_size(q), n)
        cands.append(_Candidate(_crit_from_rss(criterion, float(rss[q]), pen, D, n), D, model.lex, model, float(rss[q]), pen))
    return _finish(y, _choose(cands), cands, criterion, None, len(cands))


def select_partition(
    y,
    points,
    d: int,
    rule: PenaltyRule,
    r_max: int = 2,
    spec: CollectionSpec | None = None,
    criterion: str | None = None,
) -> SelectionOutcome:
    """Piecewise polynomials on regular partitions of the unit cube.

    All ``(r, k)`` with ``r <= r_max`` and ``(r+1)^d prod(k) <= n - 2``
    are fitted; ``points`` holds the design points, shape (n, d).
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if d not in (1, 2):
        raise DomainError("partition selection supports d in {1, 2}")
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape != (n, d):
        raise DomainError(f"design points must have shape ({n}, {d})")
    spec = _size_spec(spec, "partition", n=n, d=d, r_max=r_max)
    models = list(enumerate_models(spec))
    return select_generic(y, models, rule, spec, criterion, points)


def select_in_collection(
    y,
    spec: CollectionSpec,
    rule: PenaltyRule,
    design=None,
    criterion: str | None = None,
) -> SelectionOutcome:
    """Route to the selector matching the family of ``spec``."""
    fam = spec.family
    if fam == "nonzero":
        return select_nonzero(y, spec.p, rule, spec, criterion)
    if fam == "ordered":
        return select_ordered(y, design, spec.p, rule, spec, criterion)
    if fam == "complete":
        return select_complete(y, design, spec.p, rule, spec, criterion)
    if fam == "changepoint":
        return select_changepoints(y, spec.p, rule, spec, criterion)
    if fam == "partition":
        return select_partition(y, design, spec.d, rule, spec.r_max, spec, criterion)
    raise DomainError("selection over the dyadic-knot collection is not offered")
