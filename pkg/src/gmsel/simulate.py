"""Monte Carlo studies of the selection procedures.

Every replicate draws its noise from its own counter-based stream keyed by
``(master_seed, config_id << 32 | rep)``, where ``config_id`` is a stable
hash of the configuration point. Results therefore do not depend on the
order in which configurations or replicates are processed, and all
criteria of one configuration see the same draws.
"""

from __future__ import annotations

import csv
import io
import math
import zlib
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ._kernels import subset_search
from .errors import DomainError
from .families import CollectionSpec
from .numerics import RngStream
from .families import weight_nonzero
from .penalties import PenaltyRule, pen_classical, pen_kl
from .selectors import select_complete_many

__all__ = [
    "SimConfig",
    "SimReport",
    "SimRow",
    "emit_penalty_curve",
    "nonzero_p",
    "oracle_nonzero",
    "run_overfit_demo",
    "run_sim_nonzero",
    "run_sim_varsel",
    "run_study",
    "theta1_design",
    "theta2_design",
]

STUDIES = ("nonzero", "theta1", "theta2", "overfit")


def nonzero_p(n: int) -> int:
    """Largest dimension ``floor(n / log n)`` of the nonzero-mean study."""
    return int(math.floor(n / math.log(n)))


def k_grid(p: int) -> list[int]:
    """Powers of two up to ``p``, together with 0 and ``p``."""
    ks = {0, p}
    j = 0
    while 2**j <= p:
        ks.add(2**j)
        j += 1
    return sorted(ks)


@dataclass
class SimConfig:
    """Parameters of one simulation study.

    Attributes
    ----------
    study : str
        ``"nonzero"``, ``"theta1"``, ``"theta2"`` or ``"overfit"``.
    reps : int
        Replicates per configuration point (per design for ``theta1``).
    master_seed : int
    n_list, k_list, s_list, sigma_list, K_list : list
        Grid values; an empty ``k_list`` means the full grid of powers of
        two for the nonzero study.
    criteria : list of str
        Classical criteria to run next to the data-driven penalty.
    designs : int
        Number of random designs for ``theta1``.
    varsel_p : int, optional
        Largest subset size in the variable-selection studies; defaults to
        5 for ``theta1`` and 8 for ``theta2``.
    """

    study: str = "nonzero"
    reps: int | None = None
    master_seed: int = 20240611
    n_list: list[int] = field(default_factory=lambda: [32])
    k_list: list[int] = field(default_factory=list)
    s_list: list[float] = field(default_factory=lambda: [3.0, 4.0, 5.0])
    sigma_list: list[float] = field(default_factory=lambda: [1.0, 3.0])
    K_list: list[float] = field(default_factory=lambda: [1.1])
    criteria: list[str] = field(default_factory=lambda: ["aic", "bic", "amdl"])
    designs: int = 50
    varsel_p: int | None = None
    overfit_C: float = 0.5
    overfit_n: int = 200
    overfit_dmax: int = 100

    def __post_init__(self):
        if self.study not in STUDIES:
            raise DomainError(f"unknown study {self.study!r}")
        if self.reps is None:
            self.reps = 1000 if self.study in ("nonzero", "overfit") else 100
        if self.reps < 1:
            raise DomainError("reps must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise DomainError("master_seed must fit in 64 unsigned bits")
        for K in self.K_list:
            if not K >= 1:
                raise DomainError(f"K must be at least 1, got {K}")


@dataclass
class SimRow:
    """One (configuration point, criterion) line of a report."""

    study: str
    criterion: str
    n: int
    p: int
    k: int = 0
    s: float = math.nan
    sigma: float = 1.0
    design: str = ""
    reps: int = 0
    R: float = math.nan
    R_se: float = math.nan
    O: float = math.nan
    r: float = math.nan
    r_se: float = math.nan
    mean_D: float = math.nan
    mean_D_se: float = math.nan
    frac_D0: float = math.nan
    frac_D1: float = math.nan
    frac_D2plus: float = math.nan
    frac_Dpos: float = math.nan
    frac_Dpos_se: float = math.nan
    frac_D_is_p: float = math.nan
    freq_eq_m0: float = math.nan
    freq_sup_m0: float = math.nan
    freq_eq_m0_se: float = math.nan
    freq_sup_m0_se: float = math.nan
    seed: int = 0

    @staticmethod
    def binomial_se(freq: float, reps: int) -> float:
        return math.sqrt(max(freq * (1.0 - freq), 0.0) / reps)


@dataclass
class SimReport:
    rows: list[SimRow]

    def find(self, **match) -> list[SimRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]

    def one(self, **match) -> SimRow:
        found = self.find(**match)
        if len(found) != 1:
            raise KeyError(f"{len(found)} rows match {match}")
        return found[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = [f.name for f in fields(SimRow)]
        writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(v) for k, v in asdict(row).items()})
        return buf.getvalue()

    def to_markdown(self) -> str:
        cols = [
            ("study", "study"), ("criterion", "criterion"), ("n", "n"), ("k", "k"),
            ("s", "s"), ("sigma", "sigma"), ("design", "design"), ("R", "R"),
            ("r", "r"), ("mean_D", "mean D"), ("frac_D0", "D=0"), ("frac_D1", "D=1"),
            ("frac_D2plus", "D>=2"), ("frac_Dpos", "D>0"), ("freq_eq_m0", "m=m0"),
            ("freq_sup_m0", "m>=m0"),
        ]
        used = [(a, h) for a, h in cols if any(_shown(getattr(r, a)) for r in self.rows)]
        lines = ["| " + " | ".join(h for _, h in used) + " |", "|" + "---|" * len(used)]
        for row in self.rows:
            cells = []
            for a, _ in used:
                v = getattr(row, a)
                if a.startswith("frac") or a.startswith("freq"):
                    cells.append("" if not _shown(v) else f"{100 * v:.1f}%")
                else:
                    cells.append(str(_fmt(v)) if _shown(v) else "")
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def _shown(v) -> bool:
    if isinstance(v, float):
        return not math.isnan(v)
    return v != ""


def _fmt(v):
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return f"{v:.6g}"
    return v


def _config_id(*parts) -> int:
    return zlib.crc32("|".join(str(p) for p in parts).encode())


def _noise(master_seed: int, config_id: int, reps: int, n: int, offset: int = 0) -> np.ndarray:
    out = np.empty((reps, n))
    for rep in range(reps):
        stream = RngStream(master_seed, (config_id << 32) | (rep + offset))
        out[rep] = stream.generator().standard_normal(n)
    return out


def oracle_nonzero(n: int, p: int, k: int, s: float) -> float:
    """Best fixed-dimension risk ``min_D s^2 (k - D) 1{D <= k} + D``."""
    return min(s * s * (k - D) * (D <= k) + D for D in range(p + 1))


def _nonzero_penalties(rule_name: str, n: int, p: int) -> np.ndarray:
    if rule_name.startswith("K="):
        K = float(rule_name[2:])
        return np.array([pen_kl(K, weight_nonzero(D, n), D, n) for D in range(p + 1)])
    return np.array([pen_classical(rule_name, D, n) for D in range(p + 1)])


def _select_sorted(Y: np.ndarray, pen: np.ndarray, p: int):
    """Selected dimension and kept coordinates for each row of ``Y``."""
    reps, n = Y.shape
    Y2 = Y * Y
    order = np.argsort(-Y2, axis=1, kind="stable")
    sq = np.take_along_axis(Y2, order, axis=1)
    total = sq.sum(axis=1, keepdims=True)
    head = np.concatenate((np.zeros((reps, 1)), np.cumsum(sq[:, :p], axis=1)), axis=1)
    rss = np.maximum(total - head, 0.0)
    D = np.arange(p + 1)
    crit = rss * (1.0 + pen[None, :] / (n - D)[None, :])
    d_hat = np.argmin(crit, axis=1)
    return d_hat, order


def _nonzero_point(n, p, k, s, rules, reps, seed, penalties):
    cid = _config_id("nonzero", n, k, s)
    E = _noise(seed, cid, reps, n)
    mu = np.zeros(n)
    mu[:k] = s
    Y = mu[None, :] + E
    O = oracle_nonzero(n, p, k, s)
    rows = []
    for name in rules:
        d_hat, order = _select_sorted(Y, penalties[name], p)
        keep = np.arange(n)[None, :] < d_hat[:, None]
        mask = np.zeros_like(Y, dtype=bool)
        np.put_along_axis(mask, order, keep, axis=1)
        fitted = np.where(mask, Y, 0.0)
        loss = ((fitted - mu[None, :]) ** 2).sum(axis=1)
        rows.append(_summary_row("nonzero", name, n, p, k, s, 1.0, "", loss, d_hat, O, seed, p_for_full=p))
    return rows


def _summary_row(study, name, n, p, k, s, sigma, design, loss, d_hat, O, seed, p_for_full=None,
                 eq=None, sup=None):
    reps = loss.shape[0]
    R = float(loss.mean())
    R_se = float(loss.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.nan
    row = SimRow(study=study, criterion=name, n=n, p=p, k=k, s=s, sigma=sigma, design=design,
                 reps=reps, R=R, R_se=R_se, O=O, seed=seed)
    if O > 0:
        row.r = R / O
        row.r_se = R_se / O
    d = d_hat.astype(float)
    row.mean_D = float(d.mean())
    row.mean_D_se = float(d.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.nan
    row.frac_D0 = float(np.mean(d_hat == 0))
    row.frac_D1 = float(np.mean(d_hat == 1))
    row.frac_D2plus = float(np.mean(d_hat >= 2))
    row.frac_Dpos = float(np.mean(d_hat > 0))
    row.frac_Dpos_se = SimRow.binomial_se(row.frac_Dpos, reps)
    if p_for_full is not None:
        row.frac_D_is_p = float(np.mean(d_hat == p_for_full))
    if eq is not None:
        row.freq_eq_m0 = float(np.mean(eq))
        row.freq_sup_m0 = float(np.mean(sup))
        row.freq_eq_m0_se = SimRow.binomial_se(row.freq_eq_m0, reps)
        row.freq_sup_m0_se = SimRow.binomial_se(row.freq_sup_m0, reps)
    return row


def run_sim_nonzero(config: SimConfig) -> SimReport:
    """Detection of nonzero mean components over the ``(n, k, s)`` grid.

    The mean has ``k`` leading components equal to ``s``, the noise is
    standard Gaussian and ``p = floor(n / log n)``. Each configuration
    point reports, per criterion, the risk, the risk ratio against the best
    fixed dimension when ``k > 0``, and the distribution of the selected
    dimension.
    """
    rules = [f"K={K:g}" for K in config.K_list] + [c.lower() for c in config.criteria]
    rows = []
    for n in config.n_list:
        p = nonzero_p(n)
        penalties = {name: _nonzero_penalties(name, n, p) for name in rules}
        ks = config.k_list or k_grid(p)
        for k in ks:
            if not 0 <= k <= p:
                raise DomainError(f"k={k} outside 0..p={p} for n={n}")
            s_values = [0.0] if k == 0 else config.s_list
            for s in s_values:
                rows.extend(_nonzero_point(n, p, k, s, rules, config.reps, config.master_seed, penalties))
    return SimReport(rows)


def theta2_design(n: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Highly correlated design and mean of the second variable-selection study.

    Returns the ``(n, n)`` design and the mean ``(n, n, 0, ..., 0)``; the
    mean lies in the span of the first two columns.
    """
    X = np.zeros((n, n))
    X[0, 0], X[1, 0] = 1.0, -1.0
    X[:, 0] /= math.sqrt(2.0)
    X[0, 1], X[1, 1] = -1.0, 1.001
    X[:, 1] /= math.sqrt(1.0 + 1.001**2)
    X[:, 2] = 1.0 / n
    X[0, 2] = X[1, 2] = 1.0 / math.sqrt(2.0)
    X[:, 2] /= math.sqrt(1.0 + (n - 2.0) / n**2)
    for j in range(3, n):
        X[j, j] = 1.0
    mu = np.zeros(n)
    mu[:2] = n
    return X, mu


THETA1_COEF = np.array([3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0])
# largest subset sizes of the two variable-selection studies
THETA1_P = 5
THETA2_P = 8


def theta1_design(index: int, master_seed: int, n: int = 20) -> np.ndarray:
    """Random Gaussian design with correlations ``0.5^|j-k|`` between columns."""
    N = THETA1_COEF.shape[0]
    lags = np.abs(np.subtract.outer(np.arange(N), np.arange(N)))
    L = np.linalg.cholesky(0.5**lags)
    stream = RngStream(master_seed, (_config_id("theta1-design", n) << 32) | index)
    Z = stream.generator().standard_normal((n, N))
    return Z @ L.T


def _varsel_oracle(X, mu, sigma, p, include_empty=True):
    best, _ = subset_search(X, mu[:, None], p, exclude_prefix=False)
    best = best[:, :, 0]
    O = math.inf
    for size in range(p + 1):
        if size == 0 and not include_empty:
            continue
        for rank in range(size + 1):
            if np.isfinite(best[size, rank]):
                O = min(O, best[size, rank] + rank * sigma * sigma)
    return O


def _varsel_point(study, X, mu, sigma, m0, K, reps, seed, cid, p, label):
    n, N = X.shape
    E = _noise(seed, cid, reps, n)
    Y = mu[:, None] + sigma * E.T
    spec = CollectionSpec("complete", n=n, p=p, N=N)
    outcomes = select_complete_many(Y, X, p, PenaltyRule.kl(K), spec)
    m0 = set(m0)
    loss = np.empty(reps)
    sizes = np.empty(reps, dtype=np.int64)
    eq = np.empty(reps, dtype=bool)
    sup = np.empty(reps, dtype=bool)
    for i, out in enumerate(outcomes):
        diff = out.fit.mu_hat - mu
        loss[i] = diff @ diff
        chosen = set(out.m_hat.indices)
        sizes[i] = len(chosen)
        eq[i] = chosen == m0
        sup[i] = chosen >= m0
    O = _varsel_oracle(X, mu, sigma, p)
    return _summary_row(study, f"K={K:g}", n, p, len(m0), math.nan, sigma, label, loss, sizes,
                        O, seed, eq=eq, sup=sup)


def run_sim_varsel(config: SimConfig) -> SimReport:
    """Exhaustive subset selection on the two correlated-design studies.

    ``theta1`` draws ``config.designs`` random designs and reports one row
    per design plus a pooled row averaging the per-design quantities;
    ``theta2`` uses the fixed nearly collinear design.
    """
    rows = []
    n = 20
    p = config.varsel_p
    if p is None:
        p = THETA1_P if config.study == "theta1" else THETA2_P
    if config.study == "theta2":
        X, mu = theta2_design(n)
        for K in config.K_list:
            cid = _config_id("theta2", n, K)
            rows.append(_varsel_point("theta2", X, mu, 1.0, (0, 1), K, config.reps,
                                      config.master_seed, cid, p, "fixed"))
        return SimReport(rows)
    if config.study != "theta1":
        raise DomainError("run_sim_varsel handles the theta1 and theta2 studies")
    for sigma in config.sigma_list:
        for K in config.K_list:
            per_design = []
            for s in range(config.designs):
                X = theta1_design(s, config.master_seed, n)
                mu = X @ THETA1_COEF
                cid = _config_id("theta1", n, sigma, K, s)
                per_design.append(_varsel_point("theta1", X, mu, sigma, (0, 1, 4), K, config.reps,
                                                config.master_seed, cid, p, str(s)))
            rows.extend(per_design)
            rows.append(_pool(per_design))
    return SimReport(rows)


def _pool(rows: list[SimRow]) -> SimRow:
    first = rows[0]
    pooled = SimRow(study=first.study, criterion=first.criterion, n=first.n, p=first.p,
                    k=first.k, s=first.s, sigma=first.sigma, design="pooled",
                    reps=sum(r.reps for r in rows), seed=first.seed)
    S = len(rows)
    for name in ("R", "O", "r", "mean_D", "frac_D0", "frac_D1", "frac_D2plus", "frac_Dpos",
                 "freq_eq_m0", "freq_sup_m0"):
        setattr(pooled, name, float(np.mean([getattr(r, name) for r in rows])))
    # the designs are independent, so per-design standard errors combine in quadrature
    for name in ("R_se", "r_se", "mean_D_se", "frac_Dpos_se", "freq_eq_m0_se", "freq_sup_m0_se"):
        setattr(pooled, name, float(math.sqrt(sum(getattr(r, name) ** 2 for r in rows)) / S))
    return pooled


def run_overfit_demo(config: SimConfig) -> SimReport:
    """Selection under penalties below the minimal level, with a zero mean.

    Two settings are run. A nested chain of coordinate prefixes of
    dimension up to ``overfit_dmax`` is penalized by ``C D`` with ``C < 1``,
    and the report gives the fraction of runs selecting at least
    ``(1 - C) / 2`` times the largest dimension. AIC and BIC are then run
    on the nonzero-components collection with ``k = 0``.
    """
    rows = []
    C, n, dmax = config.overfit_C, config.overfit_n, config.overfit_dmax
    if not 0 < C < 1:
        raise DomainError("the overfitting demo needs 0 < C < 1")
    if not 1 <= dmax <= n - 2:
        raise DomainError("need 1 <= overfit_dmax <= n - 2")
    cid = _config_id("overfit-chain", n, dmax, C)
    Y = _noise(config.master_seed, cid, config.reps, n)
    sq = Y * Y
    total = sq.sum(axis=1, keepdims=True)
    head = np.concatenate((np.zeros((config.reps, 1)), np.cumsum(sq[:, :dmax], axis=1)), axis=1)
    rss = total - head
    D = np.arange(dmax + 1)
    crit = rss * (1.0 + C * D[None, :] / (n - D)[None, :])
    d_hat = np.argmin(crit, axis=1)
    loss = head[np.arange(config.reps), d_hat]
    row = _summary_row("overfit", f"chain C={C:g}", n, dmax, 0, 0.0, 1.0, "", loss, d_hat, 0.0,
                       config.master_seed, p_for_full=dmax)
    threshold = (1.0 - C) / 2.0 * dmax
    row.freq_sup_m0 = float(np.mean(d_hat >= threshold))
    row.freq_sup_m0_se = SimRow.binomial_se(row.freq_sup_m0, config.reps)
    rows.append(row)
    sub = SimConfig(study="nonzero", reps=config.reps, master_seed=config.master_seed,
                    n_list=config.n_list, k_list=[0], K_list=[], criteria=["aic", "bic"])
    for r in run_sim_nonzero(sub).rows:
        r.study = "overfit"
        rows.append(r)
    return SimReport(rows)


def emit_penalty_curve(n: int, K: float, p: int) -> list[tuple[int, float, float]]:
    """Rows ``(D, AMDL penalty, data-driven penalty)`` for ``D = 0..p``.

    The data-driven penalty uses the nonzero-components weights
    ``log C(n, D) + 2 log(D + 1)``.
    """
    if not 0 <= p <= n - 2:
        raise DomainError(f"need 0 <= p <= n - 2, got p={p}")
    return [(D, pen_classical("amdl", D, n), pen_kl(K, weight_nonzero(D, n), D, n)) for D in range(p + 1)]


def run_study(config: SimConfig) -> SimReport:
    if config.study == "nonzero":
        return run_sim_nonzero(config)
    if config.study in ("theta1", "theta2"):
        return run_sim_varsel(config)
    return run_overfit_demo(config)
