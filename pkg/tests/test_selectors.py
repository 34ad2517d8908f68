import math
import warnings

import numpy as np
import pytest

from gmsel.errors import BudgetExceededError, DomainError
from gmsel.families import CollectionSpec, ModelKey, enumerate_models
from gmsel.penalties import PenaltyRule
from gmsel.selectors import (
    prefix_rss,
    select_changepoints,
    select_complete,
    select_complete_many,
    select_generic,
    select_in_collection,
    select_nonzero,
    select_ordered,
)
from selector_cases import FAMILY_CASES, agree, make_case

KL = PenaltyRule.kl(1.1)


@pytest.mark.parametrize("family", FAMILY_CASES)
@pytest.mark.parametrize("seed", range(25))
def test_fast_selector_matches_exhaustive(family, seed):
    fast, slow = make_case(family, seed)
    assert agree(fast, slow), (fast.m_hat, slow.m_hat)


class TestNonzero:
    def test_keeps_largest_magnitudes(self):
        y = np.array([0.1, -9.0, 0.2, 8.0, -0.3, 0.05, 0.1, 0.2, 0.1, -0.1])
        out = select_nonzero(y, 5, KL)
        assert out.m_hat == ModelKey.coords([1, 3])

    def test_trace_lists_each_dimension(self):
        y = np.random.default_rng(0).standard_normal(12)
        out = select_nonzero(y, 6, KL)
        assert [row.D for row in out.trace] == list(range(7))
        assert out.evaluated == 7
        assert out.criterion_value == pytest.approx(min(row.criterion for row in out.trace))

    def test_ties_break_to_smaller_dimension(self):
        y = np.zeros(10)
        y[:2] = 1.0
        out = select_nonzero(y, 3, PenaltyRule.from_table({0: 0.0, 1: 10.0, 2: 0.0, 3: 0.0}))
        # rss is 2, 1, 0, 0 for D = 0..3, so D = 2 and 3 tie at zero
        assert out.dim == 2

    def test_spec_mismatch(self):
        with pytest.raises(DomainError):
            select_nonzero(np.zeros(10), 3, KL, CollectionSpec("nonzero", n=10, p=4))


def test_prefix_rss_handles_dependent_columns():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((10, 4))
    X[:, 2] = X[:, 0] - X[:, 1]
    y = rng.standard_normal(10)
    rss, ranks = prefix_rss(y, X, 4)
    np.testing.assert_array_equal(ranks, [0, 1, 2, 2, 3])
    assert rss[2] == pytest.approx(rss[3], rel=1e-10)
    assert np.all(np.diff(rss) <= 1e-12)


def test_ordered_picks_true_prefix():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((60, 8))
    y = X[:, :3] @ np.array([3.0, -2.0, 2.5]) + 0.5 * rng.standard_normal(60)
    out = select_ordered(y, X, 8, KL)
    assert out.m_hat == ModelKey.columns(range(3))


def test_complete_many_matches_single():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((12, 6))
    Y = rng.standard_normal((12, 5))
    many = select_complete_many(Y, X, 3, KL)
    for k in range(5):
        single = select_complete(Y[:, k], X, 3, KL)
        assert many[k].m_hat == single.m_hat


def test_complete_budget():
    X = np.random.default_rng(0).standard_normal((30, 20))
    with pytest.raises(BudgetExceededError):
        select_complete(np.zeros(30), X, 10, KL, budget=1000)


def test_changepoints_recover_jump():
    rng = np.random.default_rng(6)
    y = np.r_[np.zeros(20), np.full(20, 5.0)] + 0.3 * rng.standard_normal(40)
    out = select_changepoints(y, 5, KL)
    assert out.m_hat == ModelKey.changepoints([20])


def test_criterion_must_match_rule():
    with pytest.raises(DomainError):
        select_nonzero(np.ones(10), 3, KL, criterion="kullback")
    with pytest.raises(DomainError):
        select_nonzero(np.ones(10), 3, PenaltyRule.kullback(), criterion="L")


def test_saturated_candidates_are_skipped_under_log_criterion():
    y = np.r_[np.array([3.0, 2.0]), np.zeros(8)]
    out = select_nonzero(y, 4, PenaltyRule.classical("aic"), criterion="K")
    assert out.dim < 2


def test_all_saturated_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = select_generic(np.zeros(6), [ModelKey.coords([0])], KL, criterion="K")
    assert out.m_hat == ModelKey.coords([0])
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)
    assert out.criterion_value == -math.inf


def test_generic_weights_from_mapping():
    models = [ModelKey.coords([]), ModelKey.coords([0])]
    y = np.r_[4.0, np.random.default_rng(1).standard_normal(9) * 0.1]
    out = select_generic(y, models, KL, {models[0]: 0.0, models[1]: 1.0})
    assert out.m_hat == models[1]
    with pytest.raises(DomainError):
        select_generic(y, [], KL)


def test_router():
    rng = np.random.default_rng(9)
    y = rng.standard_normal(10)
    spec = CollectionSpec("nonzero", n=10, p=4)
    assert select_in_collection(y, spec, KL).m_hat == select_nonzero(y, 4, KL).m_hat
    with pytest.raises(DomainError):
        select_in_collection(y, CollectionSpec("dyadic", n=10), KL)
