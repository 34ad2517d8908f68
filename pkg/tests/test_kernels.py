import itertools
import os
import subprocess
import sys

import numpy as np
import pytest

import oracles
from gmsel._accel import HAS_NUMBA
from gmsel._kernels import changepoint_dp, subset_search

BACKENDS = ["numpy"] + (["numba"] if HAS_NUMBA else [])


def brute_subsets(X, y, p):
    best = {}
    for cols in oracles.all_subsets(X.shape[1], p):
        sub = X[:, list(cols)]
        rank = np.linalg.matrix_rank(sub) if cols else 0
        rss = oracles.rss_normal_equations(y, sub) if rank == len(cols) else None
        if rss is None:
            # least-squares fit onto the span of a dependent subset
            beta, *_ = np.linalg.lstsq(sub, y, rcond=None)
            rss = float(np.sum((y - sub @ beta) ** 2))
        key = (len(cols), rank)
        if key not in best or rss < best[key][0]:
            best[key] = (rss, cols)
    return best


def brute_changepoints(y, p):
    n = y.size
    out = []
    for q in range(p + 1):
        best = (np.inf, None)
        for cps in itertools.combinations(range(1, n), q):
            b = (0,) + cps + (n,)
            rss = sum(float(np.sum((y[a:c] - y[a:c].mean()) ** 2)) for a, c in zip(b[:-1], b[1:]))
            if rss < best[0]:
                best = (rss, cps)
        out.append(best)
    return out


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("seed", range(4))
def test_subset_search_matches_bruteforce(backend, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((10, 6))
    if seed % 2:
        X[:, 4] = X[:, 1] - X[:, 2]
    y = rng.standard_normal(10)
    best_rss, best_mask = subset_search(X, y, 4, backend=backend)
    ref = brute_subsets(X, y, 4)
    for (size, rank), (rss, cols) in ref.items():
        assert best_rss[size, rank, 0] == pytest.approx(rss, rel=1e-9, abs=1e-12)
        mask = int(best_mask[size, rank, 0])
        assert mask == sum(1 << c for c in cols)
    assert np.isfinite(best_rss).sum() == len(ref)


@pytest.mark.parametrize("backend", BACKENDS)
def test_subset_search_excludes_prefixes(backend):
    rng = np.random.default_rng(8)
    X = rng.standard_normal((9, 5))
    y = rng.standard_normal(9)
    _, mask = subset_search(X, y, 3, exclude_prefix=True, backend=backend)
    rss, _ = subset_search(X, y, 3, exclude_prefix=True, backend=backend)
    assert not np.isfinite(rss[0, 0, 0])
    for s in range(1, 4):
        assert int(mask[s, s, 0]) != (1 << s) - 1


@pytest.mark.skipif(not HAS_NUMBA, reason="numba disabled")
def test_subset_backends_agree_on_many_responses():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((14, 9))
    Y = rng.standard_normal((14, 25))
    a_rss, a_mask = subset_search(X, Y, 5, backend="numba")
    b_rss, b_mask = subset_search(X, Y, 5, backend="numpy")
    np.testing.assert_allclose(a_rss, b_rss, rtol=1e-10)
    np.testing.assert_array_equal(a_mask, b_mask)


def test_subset_search_column_limit():
    with pytest.raises(ValueError):
        subset_search(np.zeros((3, 63)), np.zeros(3), 1)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("seed", range(3))
def test_changepoint_dp_matches_bruteforce(backend, seed):
    rng = np.random.default_rng(seed)
    y = np.repeat(rng.normal(0, 2, 3), 3) + rng.standard_normal(9)
    rss, sets = changepoint_dp(y, 3, backend=backend)
    for q, (ref_rss, ref_cps) in enumerate(brute_changepoints(y, 3)):
        assert rss[q] == pytest.approx(ref_rss, rel=1e-9, abs=1e-12)
        assert sets[q] == ref_cps


@pytest.mark.skipif(not HAS_NUMBA, reason="numba disabled")
def test_changepoint_backends_agree():
    y = np.random.default_rng(5).standard_normal(120) + np.repeat([0.0, 3.0, -1.0], 40)
    a = changepoint_dp(y, 6, backend="numba")
    b = changepoint_dp(y, 6, backend="numpy")
    np.testing.assert_allclose(a[0], b[0], rtol=1e-10)
    assert a[1] == b[1]


def test_env_flag_selects_numpy():
    env = dict(os.environ, GMSEL_DISABLE_NUMBA="1")
    code = "import gmsel; print(gmsel.backend(), gmsel.HAS_NUMBA)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "False"]
