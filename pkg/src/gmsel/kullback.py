"""Joint estimation of mean and variance under Kullback loss."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, HypothesisError
from .estimation import _orthonormal_basis, project
from .families import CollectionSpec, ModelKey, count_models, dimension_counts, enumerate_models
from .numerics import RngStream
from .penalties import PenaltyRule
from .selectors import SelectionOutcome, select_in_collection

__all__ = [
    "KullbackSelection",
    "RiskEstimate",
    "ThetaPair",
    "kl_bias",
    "kl_bias_via_divergence",
    "kl_div",
    "kl_risk_bounds",
    "kl_risk_mc",
    "select_kullback",
]


@dataclass(frozen=True)
class ThetaPair:
    """Mean vector and noise variance of a Gaussian vector with i.i.d. noise."""

    mu: np.ndarray
    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise DomainError(f"variance must be positive, got {self.sigma2}")
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))


def kl_div(theta: ThetaPair, theta_prime: ThetaPair) -> float:
    """Kullback divergence from N(mu, sigma^2 I) to N(nu, tau^2 I)."""
    mu, nu = theta.mu, theta_prime.mu
    if mu.shape != nu.shape:
        raise DomainError("mean vectors differ in length")
    n = mu.shape[0]
    s2, t2 = theta.sigma2, theta_prime.sigma2
    diff = mu - nu
    ratio = s2 / t2
    # log(1/ratio) + ratio - 1, written to stay accurate when ratio ~ 1
    core = ratio - 1.0 - math.log1p(ratio - 1.0)
    return 0.5 * n * (core + float(diff @ diff) / (n * t2))


def _projected_mean(mu, model, design):
    return project(mu, model, design).mu_hat


def kl_bias(mu, sigma2: float, model: ModelKey, design=None) -> float:
    """Smallest divergence to a law with mean in the model, ``n/2 log(1 + b/(n s2))``."""
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    mu = np.asarray(mu, dtype=float)
    n = mu.shape[0]
    resid = mu - _projected_mean(mu, model, design)
    return 0.5 * n * math.log1p(float(resid @ resid) / (n * sigma2))


def kl_bias_via_divergence(mu, sigma2: float, model: ModelKey, design=None) -> float:
    """The same quantity as :func:`kl_bias`, through the optimal pair in the model."""
    mu = np.asarray(mu, dtype=float)
    n = mu.shape[0]
    mu_m = _projected_mean(mu, model, design)
    resid = mu - mu_m
    best = ThetaPair(mu_m, sigma2 + float(resid @ resid) / n)
    return kl_div(ThetaPair(mu, sigma2), best)


@dataclass(frozen=True)
class KullbackSelection:
    """Selected model, the estimated pair, and diagnostics of the collection.

    ``alpha`` is the smallest ``N_m / n``; ``sigma1`` is the collection-size
    residual term of the risk bound, reported for information only.
    """

    outcome: SelectionOutcome
    theta: ThetaPair
    alpha: float
    sigma1: float


def _max_dim(spec: CollectionSpec) -> int:
    return max(dimension_counts(spec))


def select_kullback(
    y,
    spec: CollectionSpec,
    K1: float = 1.1,
    K2: float | None = None,
    design=None,
) -> KullbackSelection:
    """Minimize ``n/2 log(rss/N) + pen/2`` with the Fisher-based penalty.

    Raises
    ------
    HypothesisError
        If some model of the collection has dimension above ``n - 5``.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if spec.n != n:
        raise DomainError("spec does not match the length of y")
    d_max = _max_dim(spec)
    if d_max > n - 5:
        raise HypothesisError(
            f"the collection has models of dimension {d_max} > n - 5 = {n - 5}"
        )
    rule = PenaltyRule.kullback(K1, K2)
    outcome = select_in_collection(y, spec, rule, design, criterion="kullback")
    alpha = (n - d_max) / n
    size = count_models(spec)
    K2v = rule.K2
    sigma1 = (
        2.5
        * math.exp(1.0 / (K2v * K2v * alpha))
        * n
        * math.exp(-n / (4.0 * K2v * K2v))
        * math.exp(4.0 * math.log(size) / (alpha * n))
    )
    theta = ThetaPair(outcome.fit.mu_hat, outcome.fit.sigma2_hat)
    return KullbackSelection(outcome, theta, alpha, sigma1)


@dataclass(frozen=True)
class RiskEstimate:
    estimate: float
    std_error: float
    reps: int


def _basis(model: ModelKey, n: int, design) -> np.ndarray:
    if model.kind == "coords":
        B = np.zeros((n, len(model.indices)))
        B[list(model.indices), np.arange(len(model.indices))] = 1.0
        return B
    if model.kind == "columns":
        return _orthonormal_basis(np.asarray(design, dtype=float)[:, list(model.indices)])
    if model.kind == "changepoints":
        bounds = (0,) + model.indices + (n,)
        B = np.zeros((n, len(bounds) - 1))
        for j, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
            B[a:b, j] = 1.0 / math.sqrt(b - a)
        return B
    # generic route: project the canonical basis
    E = np.eye(n)
    P = np.column_stack([project(E[:, i], model, design).mu_hat for i in range(n)])
    return _orthonormal_basis(P)


def kl_risk_mc(
    mu,
    sigma2: float,
    model: ModelKey,
    reps: int,
    stream: RngStream,
    design=None,
) -> RiskEstimate:
    """Monte Carlo estimate of the Kullback risk of the fitted pair of a model."""
    mu = np.asarray(mu, dtype=float)
    n = mu.shape[0]
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    if reps < 2:
        raise DomainError("reps must be at least 2")
    Q = _basis(model, n, design)
    D = Q.shape[1]
    N = n - D
    if N <= 2:
        raise DomainError(f"need N_m > 2, got {N}")
    gen = stream.generator()
    sigma = math.sqrt(sigma2)
    vals = np.empty(reps)
    chunk = 4096
    for start in range(0, reps, chunk):
        m = min(chunk, reps - start)
        Y = mu[None, :] + sigma * gen.standard_normal((m, n))
        fitted = (Y @ Q) @ Q.T
        resid = Y - fitted
        s2_hat = np.einsum("ij,ij->i", resid, resid) / N
        diff = fitted - mu[None, :]
        ratio = sigma2 / s2_hat
        core = ratio - 1.0 - np.log(ratio)
        vals[start : start + m] = 0.5 * n * (core + np.einsum("ij,ij->i", diff, diff) / (n * s2_hat))
    return RiskEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(reps)), reps)


def kl_risk_bounds(bias: float, D: int, n: int) -> tuple[float, float]:
    """Lower and upper ends of the risk sandwich ``[max(bias, D/2), bias + 4(D+2)]``."""
    return max(bias, 0.5 * D), bias + 4.0 * (D + 2.0)
