"""Least-squares projections and the penalized selection criteria."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SaturatedFitError
from .families import ModelKey

__all__ = [
    "RSS_FLOOR",
    "FitRecord",
    "cell_index",
    "crit_K",
    "crit_K_kullback",
    "crit_L",
    "project",
    "project_columns",
    "span_rank",
]

# below this residual sum of squares the log criteria are undefined
RSS_FLOOR = 1e-300


@dataclass(frozen=True)
class FitRecord:
    """Projection of a response onto one model.

    Attributes
    ----------
    model : ModelKey
    mu_hat : ndarray
        Fitted mean, the orthogonal projection of ``y``.
    rss : float
        Residual sum of squares ``||y - mu_hat||^2``.
    effective_rank : int
        Dimension of the realized span; used as D_m in the criteria.
    n : int
        Number of observations.
    """

    model: ModelKey
    mu_hat: np.ndarray
    rss: float
    effective_rank: int
    n: int

    @property
    def dim(self) -> int:
        return self.effective_rank

    @property
    def N(self) -> int:
        return self.n - self.effective_rank

    @property
    def sigma2_hat(self) -> float:
        return self.rss / self.N if self.N > 0 else math.nan

    @property
    def saturated(self) -> bool:
        return self.rss < RSS_FLOOR


def _rank_tol(s: np.ndarray, shape) -> float:
    return max(shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)


def span_rank(X: np.ndarray) -> int:
    """Numerical rank of the columns of ``X`` (SVD with the usual tolerance)."""
    if X.size == 0:
        return 0
    s = np.linalg.svd(X, compute_uv=False)
    return int(np.sum(s > _rank_tol(s, X.shape)))


def _orthonormal_basis(X: np.ndarray) -> np.ndarray:
    if X.shape[1] == 0:
        return np.zeros((X.shape[0], 0))
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    r = int(np.sum(s > _rank_tol(s, X.shape)))
    return U[:, :r]


def project_columns(y: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, int]:
    """Projection of ``y`` onto the column span of ``X`` and that span's rank."""
    Q = _orthonormal_basis(X)
    return Q @ (Q.T @ y), Q.shape[1]


def cell_index(points: np.ndarray, k: tuple[int, ...]) -> np.ndarray:
    """Flat index of the regular grid cell holding each design point.

    Points must lie in the unit cube; cell ``j`` along an axis with ``k``
    cells is ``[j/k, (j+1)/k)``, the last cell being closed.
    """
    idx = np.zeros(points.shape[0], dtype=np.int64)
    for axis, kk in enumerate(k):
        j = np.minimum(np.floor(points[:, axis] * kk).astype(np.int64), kk - 1)
        idx = idx * kk + j
    return idx


def _cell_design(t: np.ndarray, r: int, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    # tensor-product monomials of degree <= r per axis, on coordinates mapped to [-1, 1]
    u = 2.0 * (t - lo) / (hi - lo) - 1.0
    cols = []
    for powers in itertools.product(range(r + 1), repeat=t.shape[1]):
        col = np.ones(t.shape[0])
        for axis, pw in enumerate(powers):
            if pw:
                col = col * u[:, axis] ** pw
        cols.append(col)
    return np.column_stack(cols)


def _check_points(points, n):
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[0] != n:
        raise DomainError(f"design has {points.shape[0]} points for {n} observations")
    if np.any(points < 0) or np.any(points > 1):
        raise DomainError("partition design points must lie in [0, 1]^d")
    return points


def project(y, model: ModelKey, design=None) -> FitRecord:
    """Orthogonal projection of ``y`` onto the space of ``model``.

    Parameters
    ----------
    y : array_like, shape (n,)
    model : ModelKey
    design : array_like, optional
        Column matrix (n, N) for column models, or design points (n, d) in
        the unit cube for partition models.

    Notes
    -----
    Column subsets are projected through an SVD so that rank-deficient
    subsets project onto their span; empty partition cells contribute
    neither dimension nor residual.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DomainError("y must be a vector")
    n = y.shape[0]
    kind = model.kind
    if kind == "coords":
        if model.indices and (model.indices[0] < 0 or model.indices[-1] >= n):
            raise DomainError("coordinate index out of range")
        mu = np.zeros(n)
        idx = list(model.indices)
        mu[idx] = y[idx]
        rank = len(idx)
    elif kind == "columns":
        if design is None:
            raise DomainError("column models need a design matrix")
        X = np.asarray(design, dtype=float)
        if X.ndim != 2 or X.shape[0] != n:
            raise DomainError(f"design must have shape ({n}, N)")
        if model.indices and (model.indices[0] < 0 or model.indices[-1] >= X.shape[1]):
            raise DomainError("column index out of range")
        mu, rank = project_columns(y, X[:, list(model.indices)])
    elif kind == "changepoints":
        cps = model.indices
        if cps and (cps[0] < 1 or cps[-1] > n - 1):
            raise DomainError("change points must lie in 1..n-1")
        bounds = (0,) + cps + (n,)
        mu = np.empty(n)
        for a, b in zip(bounds[:-1], bounds[1:]):
            mu[a:b] = y[a:b].mean()
        rank = len(cps) + 1
    elif kind == "partition":
        if design is None:
            raise DomainError("partition models need design points")
        points = _check_points(design, n)
        if points.shape[1] != len(model.k):
            raise DomainError("design dimension does not match the partition")
        cells = cell_index(points, model.k)
        mu = np.zeros(n)
        rank = 0
        k = np.asarray(model.k, dtype=float)
        for c in np.unique(cells):
            sel = cells == c
            # recover the cell's box from its flat index
            pos = np.unravel_index(int(c), model.k)
            lo = np.asarray(pos, dtype=float) / k
            hi = (np.asarray(pos, dtype=float) + 1.0) / k
            B = _cell_design(points[sel], model.r, lo, hi)
            fit, rk = project_columns(y[sel], B)
            mu[sel] = fit
            rank += rk
    else:
        raise DomainError(f"unknown model kind {kind!r}")
    resid = y - mu
    return FitRecord(model, mu, float(resid @ resid), int(rank), n)


def crit_L(fit: FitRecord, pen: float, n: int | None = None) -> float:
    """Multiplicative criterion ``rss (1 + pen / (n - D))``."""
    n = fit.n if n is None else n
    N = n - fit.dim
    if N < 1:
        raise DomainError("criterion needs n - D >= 1")
    return fit.rss * (1.0 + pen / N)


def _log_rss(rss):
    if rss < RSS_FLOOR:
        raise SaturatedFitError(f"residual sum of squares {rss} is below {RSS_FLOOR}")
    return math.log(rss)


def crit_K(fit: FitRecord, pen_prime: float, n: int | None = None) -> float:
    """Log-likelihood criterion ``n/2 log(rss / n) + pen' / 2``."""
    n = fit.n if n is None else n
    return 0.5 * n * (_log_rss(fit.rss) - math.log(n)) + 0.5 * pen_prime


def crit_K_kullback(fit: FitRecord, pen_star: float) -> float:
    """Kullback-loss criterion ``n/2 log(rss / N) + pen* / 2``."""
    if fit.N < 1:
        raise DomainError("criterion needs n - D >= 1")
    return 0.5 * fit.n * (_log_rss(fit.rss) - math.log(fit.N)) + 0.5 * pen_star
