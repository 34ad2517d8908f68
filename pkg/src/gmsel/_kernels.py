"""Search kernels: exhaustive subset enumeration and segmentation DP.

Each kernel has a loop form, compiled by numba when available, and a
vectorized numpy form used when numba is disabled. Both return identical
results up to floating-point rounding; ``benchmarks/bench_kernels.py``
times one against the other.
"""

import numpy as np

from ._accel import HAS_NUMBA, jit

__all__ = ["changepoint_dp", "subset_search"]

_DEP_TOL = 1e-10


@jit
def _subset_search_loops(X, Y, p, exclude_prefix, tol):
    n, ncol = X.shape
    R = Y.shape[1]
    best_rss = np.full((p + 1, p + 1, R), np.inf)
    best_mask = np.zeros((p + 1, p + 1, R), dtype=np.int64)
    Q = np.zeros((p + 1, n))
    rank_at = np.zeros(p + 2, dtype=np.int64)
    mask_at = np.zeros(p + 2, dtype=np.int64)
    rss = np.zeros((p + 2, R))
    nxt = np.zeros(p + 2, dtype=np.int64)
    for k in range(R):
        s = 0.0
        for i in range(n):
            s += Y[i, k] * Y[i, k]
        rss[0, k] = s
    if not exclude_prefix:
        for k in range(R):
            best_rss[0, 0, k] = rss[0, k]
    v = np.empty(n)
    d = 0
    nxt[0] = 0
    while d >= 0:
        if d == p or nxt[d] >= ncol:
            d -= 1
            continue
        j = nxt[d]
        nxt[d] += 1
        norm0 = 0.0
        for i in range(n):
            v[i] = X[i, j]
            norm0 += v[i] * v[i]
        r = rank_at[d]
        # classical Gram-Schmidt applied twice for orthogonality
        for _ in range(2):
            for a in range(r):
                c = 0.0
                for i in range(n):
                    c += Q[a, i] * v[i]
                for i in range(n):
                    v[i] -= c * Q[a, i]
        nv = 0.0
        for i in range(n):
            nv += v[i] * v[i]
        if norm0 > 0.0 and nv > tol * tol * norm0:
            nv = np.sqrt(nv)
            for i in range(n):
                Q[r, i] = v[i] / nv
            new_rank = r + 1
            for k in range(R):
                z = 0.0
                for i in range(n):
                    z += Q[r, i] * Y[i, k]
                val = rss[d, k] - z * z
                rss[d + 1, k] = val if val > 0.0 else 0.0
        else:
            new_rank = r
            for k in range(R):
                rss[d + 1, k] = rss[d, k]
        rank_at[d + 1] = new_rank
        mask_at[d + 1] = mask_at[d] | (np.int64(1) << j)
        size = d + 1
        if not (exclude_prefix and j == d):
            for k in range(R):
                if rss[d + 1, k] < best_rss[size, new_rank, k]:
                    best_rss[size, new_rank, k] = rss[d + 1, k]
                    best_mask[size, new_rank, k] = mask_at[d + 1]
        d += 1
        nxt[d] = j + 1
    return best_rss, best_mask


def _subset_search_numpy(X, Y, p, exclude_prefix, tol):
    n, ncol = X.shape
    R = Y.shape[1]
    best_rss = np.full((p + 1, p + 1, R), np.inf)
    best_mask = np.zeros((p + 1, p + 1, R), dtype=np.int64)
    Q = np.zeros((p + 1, n))
    rank_at = [0] * (p + 2)
    mask_at = [0] * (p + 2)
    rss = np.zeros((p + 2, R))
    nxt = [0] * (p + 2)
    rss[0] = np.einsum("ik,ik->k", Y, Y)
    if not exclude_prefix:
        best_rss[0, 0] = rss[0]
    d = 0
    while d >= 0:
        if d == p or nxt[d] >= ncol:
            d -= 1
            continue
        j = nxt[d]
        nxt[d] += 1
        v = X[:, j].copy()
        norm0 = v @ v
        r = rank_at[d]
        if r:
            Qr = Q[:r]
            v -= Qr.T @ (Qr @ v)
            v -= Qr.T @ (Qr @ v)
        nv = v @ v
        if norm0 > 0.0 and nv > tol * tol * norm0:
            Q[r] = v / np.sqrt(nv)
            z = Q[r] @ Y
            rss[d + 1] = np.maximum(rss[d] - z * z, 0.0)
            new_rank = r + 1
        else:
            rss[d + 1] = rss[d]
            new_rank = r
        rank_at[d + 1] = new_rank
        mask_at[d + 1] = mask_at[d] | (1 << j)
        size = d + 1
        if not (exclude_prefix and j == d):
            slot = best_rss[size, new_rank]
            better = rss[d + 1] < slot
            if better.any():
                slot[better] = rss[d + 1][better]
                best_mask[size, new_rank][better] = mask_at[d + 1]
        d += 1
        nxt[d] = j + 1
    return best_rss, best_mask


def subset_search(X, Y, p, exclude_prefix=False, tol=_DEP_TOL, backend=None):
    """Smallest rss over all column subsets, grouped by size and rank.

    Parameters
    ----------
    X : ndarray, shape (n, N)
        Candidate columns, ``N <= 62``.
    Y : ndarray, shape (n, R)
        Responses; the column-dependent work is shared across them.
    p : int
        Largest subset size.
    exclude_prefix : bool
        Skip the subsets ``{0, ..., s-1}`` (including the empty set).
    tol : float
        A column whose residual after orthogonalization has relative norm
        below ``tol`` does not raise the rank.
    backend : {None, "numba", "numpy"}
        Force one implementation; by default numba is used when enabled.

    Returns
    -------
    best_rss : ndarray, shape (p+1, p+1, R)
        ``best_rss[s, r, k]`` is the minimum over subsets of size ``s`` and
        rank ``r`` for response ``k`` (``inf`` when no such subset exists).
    best_mask : ndarray, shape (p+1, p+1, R)
        Bit mask of the lexicographically first minimizing subset.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[1] > 62:
        raise ValueError("subset search supports at most 62 columns")
    p = int(min(p, X.shape[1]))
    use_numba = HAS_NUMBA if backend is None else backend == "numba"
    if use_numba:
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is disabled")
        return _subset_search_loops(X, Y, p, bool(exclude_prefix), float(tol))
    return _subset_search_numpy(X, Y, p, bool(exclude_prefix), float(tol))


@jit
def _changepoint_dp_loops(y, p):
    n = y.shape[0]
    s1 = np.zeros(n + 1)
    s2 = np.zeros(n + 1)
    for i in range(n):
        s1[i + 1] = s1[i] + y[i]
        s2[i + 1] = s2[i] + y[i] * y[i]
    F = np.full((p + 1, n + 1), np.inf)
    arg = np.zeros((p + 1, n + 1), dtype=np.int64)
    for j in range(1, n + 1):
        m = s1[j]
        F[0, j] = max(s2[j] - m * m / j, 0.0)
    for q in range(1, p + 1):
        for j in range(q + 1, n + 1):
            best = np.inf
            where = 0
            for i in range(q, j):
                m = s1[j] - s1[i]
                c = s2[j] - s2[i] - m * m / (j - i)
                if c < 0.0:
                    c = 0.0
                val = F[q - 1, i] + c
                if val < best:
                    best = val
                    where = i
            F[q, j] = best
            arg[q, j] = where
    return F[:, n].copy(), arg


def _changepoint_dp_numpy(y, p):
    n = y.shape[0]
    s1 = np.concatenate(([0.0], np.cumsum(y)))
    s2 = np.concatenate(([0.0], np.cumsum(y * y)))
    F = np.full((p + 1, n + 1), np.inf)
    arg = np.zeros((p + 1, n + 1), dtype=np.int64)
    j = np.arange(1, n + 1)
    F[0, 1:] = np.maximum(s2[1:] - s1[1:] ** 2 / j, 0.0)
    for q in range(1, p + 1):
        for jj in range(q + 1, n + 1):
            i = np.arange(q, jj)
            m = s1[jj] - s1[i]
            c = np.maximum(s2[jj] - s2[i] - m * m / (jj - i), 0.0)
            val = F[q - 1, i] + c
            w = int(np.argmin(val))
            F[q, jj] = val[w]
            arg[q, jj] = i[w]
    return F[:, n].copy(), arg


def changepoint_dp(y, p, backend=None):
    """Minimum rss of piecewise-constant fits with ``q = 0..p`` change points.

    ``y`` is centered internally for accuracy of the running sums.

    Returns
    -------
    rss : ndarray, shape (p+1,)
    change_points : list of tuple
        Minimizing change-point positions for each ``q`` (segment starts,
        in ``1..n-1``).
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    y = y - y.mean()
    use_numba = HAS_NUMBA if backend is None else backend == "numba"
    if use_numba:
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is disabled")
        rss, arg = _changepoint_dp_loops(y, int(p))
    else:
        rss, arg = _changepoint_dp_numpy(y, int(p))
    n = y.shape[0]
    sets = []
    for q in range(p + 1):
        cps = []
        j = n
        for level in range(q, 0, -1):
            j = int(arg[level, j])
            cps.append(j)
        sets.append(tuple(reversed(cps)))
    return rss, sets
