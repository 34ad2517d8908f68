import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from gmsel.errors import DomainError, SaturatedFitError
from gmsel.estimation import (
    cell_index,
    crit_K,
    crit_K_kullback,
    crit_L,
    project,
    span_rank,
)
from gmsel.families import ModelKey
from gmsel.penalties import pen_convert

finite = st.floats(-1e3, 1e3, allow_nan=False)


class TestProject:
    def test_coords(self):
        y = np.array([1.0, -2.0, 3.0, 4.0])
        fit = project(y, ModelKey.coords([1, 3]))
        np.testing.assert_array_equal(fit.mu_hat, [0, -2, 0, 4])
        assert fit.rss == 10.0 and fit.dim == 2 and fit.N == 2

    @pytest.mark.parametrize("cols", [(), (0,), (1, 3), (0, 2, 4)])
    def test_columns_against_normal_equations(self, cols):
        rng = np.random.default_rng(len(cols))
        X = rng.standard_normal((15, 5))
        y = rng.standard_normal(15)
        fit = project(y, ModelKey.columns(cols), X)
        ref = oracles.rss_normal_equations(y, X[:, list(cols)])
        assert fit.rss == pytest.approx(ref, rel=1e-10, abs=1e-12)
        assert fit.dim == len(cols)

    def test_rank_deficient_columns(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((12, 3))
        X = np.column_stack([X, X[:, 0] + X[:, 1]])
        y = rng.standard_normal(12)
        fit = project(y, ModelKey.columns([0, 1, 3]), X)
        assert fit.dim == 2
        assert fit.rss == pytest.approx(oracles.rss_normal_equations(y, X[:, :2]), rel=1e-10)

    def test_changepoints(self):
        y = np.array([1.0, 3.0, 10.0, 12.0, 14.0])
        fit = project(y, ModelKey.changepoints([2]))
        np.testing.assert_allclose(fit.mu_hat, [2, 2, 12, 12, 12])
        assert fit.rss == pytest.approx(2 + 8) and fit.dim == 2

    def test_partition_constant_cells(self):
        t = np.linspace(0.05, 0.95, 10)
        y = np.where(t < 0.5, 1.0, 5.0) + 0.0
        fit = project(y, ModelKey.partition(0, (2,)), t)
        np.testing.assert_allclose(fit.mu_hat, y)
        assert fit.dim == 2 and fit.rss == pytest.approx(0.0, abs=1e-20)

    def test_partition_linear_exact(self):
        rng = np.random.default_rng(4)
        pts = rng.uniform(size=(30, 2))
        y = np.where(pts[:, 0] < 0.5, 1 + 2 * pts[:, 1], 3 - pts[:, 0] * pts[:, 1])
        fit = project(y, ModelKey.partition(1, (2, 1)), pts)
        assert fit.dim == 8
        assert fit.rss == pytest.approx(0.0, abs=1e-18)

    def test_partition_empty_cells_have_no_dimension(self):
        t = np.array([0.01, 0.02, 0.03, 0.04, 0.9, 0.95])
        fit = project(np.arange(6.0), ModelKey.partition(0, (4,)), t)
        assert fit.dim == 2

    def test_cell_index(self):
        pts = np.array([[0.0, 0.0], [0.99, 0.1], [1.0, 1.0], [0.5, 0.5]])
        np.testing.assert_array_equal(cell_index(pts, (2, 3)), [0, 3, 5, 4])

    @given(arrays(float, 9, elements=finite))
    def test_residual_orthogonal(self, y):
        X = np.random.default_rng(1).standard_normal((9, 4))
        fit = project(y, ModelKey.columns([0, 2]), X)
        resid = y - fit.mu_hat
        scale = 1 + float(np.abs(y).max())
        np.testing.assert_allclose(X[:, [0, 2]].T @ resid, 0, atol=1e-9 * scale)

    @pytest.mark.parametrize(
        "y,model,design",
        [
            (np.zeros((2, 2)), ModelKey.coords([0]), None),
            (np.zeros(3), ModelKey.coords([3]), None),
            (np.zeros(3), ModelKey.columns([0]), None),
            (np.zeros(3), ModelKey.changepoints([3]), None),
            (np.zeros(3), ModelKey.partition(0, (2,)), np.array([0.1, 0.5, 1.5])),
        ],
    )
    def test_domain(self, y, model, design):
        with pytest.raises(DomainError):
            project(y, model, design)


def test_span_rank():
    assert span_rank(np.zeros((4, 0))) == 0
    X = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    assert span_rank(X) == 1


class TestCriteria:
    def _fit(self, rss, D, n):
        return project(np.r_[np.full(D, 1.0), np.full(n - D, math.sqrt(rss / (n - D)))],
                       ModelKey.coords(range(D)))

    def test_values(self):
        fit = self._fit(8.0, 2, 10)
        assert fit.rss == pytest.approx(8.0)
        assert crit_L(fit, 4.0) == pytest.approx(8.0 * 1.5)
        assert crit_K(fit, 3.0) == pytest.approx(5 * math.log(0.8) + 1.5)
        assert crit_K_kullback(fit, 3.0) == pytest.approx(5 * math.log(1.0) + 1.5)

    def test_saturated(self):
        fit = project(np.zeros(5), ModelKey.coords([0]))
        assert crit_L(fit, 1.0) == 0.0
        with pytest.raises(SaturatedFitError):
            crit_K(fit, 1.0)
        with pytest.raises(SaturatedFitError):
            crit_K_kullback(fit, 1.0)

    def test_needs_residual_dof(self):
        fit = project(np.arange(1.0, 4.0), ModelKey.coords([0, 1, 2]))
        with pytest.raises(DomainError):
            crit_L(fit, 1.0)

    @given(
        st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0, 50), st.floats(0, 50),
        st.integers(0, 5), st.integers(0, 5),
    )
    def test_L_and_K_order_models_alike(self, rss1, rss2, pen1, pen2, D1, D2):
        n = 20
        f1, f2 = self._fit(rss1, D1, n), self._fit(rss2, D2, n)
        dL = crit_L(f1, pen1) - crit_L(f2, pen2)
        dK = crit_K(f1, pen_convert(pen1, D1, n)) - crit_K(f2, pen_convert(pen2, D2, n))
        if abs(dL) > 1e-9 * (crit_L(f1, pen1) + crit_L(f2, pen2)):
            assert np.sign(dL) == np.sign(dK)
