import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from gmsel.dkhi_fish import dkhi, fish
from gmsel.errors import DomainError
from gmsel.numerics import phi
from gmsel.penalties import (
    PenaltyRule,
    hka_check,
    pen_classical,
    pen_convert,
    pen_kl,
    pen_kl_upper,
    pen_kullback,
    pen_kullback_upper,
    pen_minimal,
    phi_inv,
)

# frozen after checking each against an independent route: pen_kl and
# pen_kullback by feeding the value back through the mpmath quadrature
# oracles, the upper bounds by re-deriving the closed forms by hand
L_32_2 = oracles.log_binom(32, 2) + 2 * math.log(3)
PEN_KL_FROZEN = 29.234541197079167
PEN_KL_UPPER_FROZEN = 94.81973223133856
PEN_KULLBACK_FROZEN = 56.5748960936886
PEN_KULLBACK_UPPER_FROZEN = 100.89519384216077


class TestPhiInv:
    def test_zero(self):
        assert phi_inv(0.0) == 1.0

    @given(st.floats(1e-6, 500))
    def test_identity(self, a):
        assert phi(phi_inv(a)) == pytest.approx(a, rel=1e-10)

    @pytest.mark.parametrize("n", [8, 32, 512, 10**6])
    def test_bracket(self, n):
        a = math.log(n)
        x = phi_inv(a)
        assert 2 * a + 1 + math.log(2 * a + 1) <= x <= 2 * a + 1 + math.log(4 * a + 2)

    def test_value_at_log_512(self):
        assert phi_inv(math.log(512)) == pytest.approx(16.2657, abs=1e-4)

    def test_domain(self):
        with pytest.raises(DomainError):
            phi_inv(-1.0)


class TestPenKl:
    def test_frozen(self):
        assert pen_kl(1.1, L_32_2, 2, 32) == pytest.approx(PEN_KL_FROZEN, rel=1e-10)

    def test_roundtrip_through_quadrature(self):
        K, D, n = 1.1, 2, 32
        N = n - D
        x = PEN_KL_FROZEN / (K * N / (N - 1))
        assert oracles.dkhi_quad(D + 1, N - 1, x) == pytest.approx(math.exp(-L_32_2), rel=1e-8)

    def test_zero_weight(self):
        assert pen_kl(1.1, 0.0, 3, 20) == 0.0

    @pytest.mark.parametrize("K", [1.0, 1.1, 2.0])
    def test_linear_in_K(self, K):
        assert pen_kl(K, 5.0, 4, 40) == pytest.approx(K * pen_kl(1.0, 5.0, 4, 40), rel=1e-13)

    @pytest.mark.parametrize("D,n", [(0, 20), (3, 20), (10, 100)])
    def test_increasing_in_weight(self, D, n):
        vals = [pen_kl(1.1, L, D, n) for L in (0.5, 1, 5, 20, 100)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_large_weight_is_finite(self):
        assert math.isfinite(pen_kl(1.1, 2000.0, 10, 200))

    @given(st.integers(0, 30), st.integers(3, 60), st.floats(1e-3, 200))
    def test_solves_defining_equation(self, D, extra, L):
        n = D + extra
        N = n - D
        x = pen_kl(1.0, L, D, n) * (N - 1) / N
        assert math.log(dkhi(D + 1, N - 1, x)) == pytest.approx(-L, rel=1e-8, abs=1e-10)

    @pytest.mark.parametrize(
        "args", [(0.9, 1.0, 2, 20), (1.1, -1.0, 2, 20), (1.1, 1.0, 19, 20), (1.1, 1.0, -1, 20)]
    )
    def test_domain(self, args):
        with pytest.raises(DomainError):
            pen_kl(*args)


class TestPenKlUpper:
    def test_frozen(self):
        assert pen_kl_upper(1.1, 10.0, 5, 100) == pytest.approx(PEN_KL_UPPER_FROZEN, rel=1e-12)

    @pytest.mark.parametrize("D", [0, 1, 3, 10, 40])
    @pytest.mark.parametrize("n", [50, 100, 512])
    @pytest.mark.parametrize("L", [0.1, 1.0, 10.0, 100.0])
    def test_dominates(self, D, n, L):
        assert pen_kl(1.1, L, D, n) <= pen_kl_upper(1.1, L, D, n)

    def test_overflow_is_vacuous(self):
        assert pen_kl_upper(1.1, 5000.0, 3, 12) == math.inf

    @pytest.mark.parametrize("args", [(1.1, 1.0, 5, 11), (1.1, 1.0, 0, 3)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            pen_kl_upper(*args)


class TestPenKullback:
    def test_frozen(self):
        assert pen_kullback(2, 2, 5, 3, 50) == pytest.approx(PEN_KULLBACK_FROZEN, rel=1e-10)

    def test_roundtrip_through_quadrature(self):
        K1, K2, L, D, n = 2.0, 2.0, 5.0, 3, 50
        Nm = n - D
        inner = PEN_KULLBACK_FROZEN * (K2 - 1) / K2 + D
        x = inner / (K1 * (D + 1) * Nm / (Nm - 1))
        assert oracles.fish_quad(D + 1, Nm - 1, x) == pytest.approx(math.exp(-L), rel=1e-7)

    def test_clipped_at_zero(self):
        assert pen_kullback(2, 2, 0, 1, 20) == 0.0

    def test_upper_frozen(self):
        got = pen_kullback_upper(2, 2, 0, 1, 20)
        assert got == pytest.approx(PEN_KULLBACK_UPPER_FROZEN, rel=1e-12)

    @pytest.mark.parametrize("D", [1, 2, 5, 20])
    @pytest.mark.parametrize("n", [40, 100, 400])
    @pytest.mark.parametrize("L", [0.0, 1.0, 10.0, 60.0])
    def test_dominated_by_upper(self, D, n, L):
        assert pen_kullback(1.5, 3.0, L, D, n) <= pen_kullback_upper(1.5, 3.0, L, D, n)

    def test_fish_equation(self):
        D, n, L = 4, 30, 3.0
        Nm = n - D
        val = pen_kullback(1.5, 2.5, L, D, n)
        x = (val / (2.5 / 1.5) + D) / (1.5 * (D + 1) * Nm / (Nm - 1))
        assert fish(D + 1, Nm - 1, x) == pytest.approx(math.exp(-L), rel=1e-8)

    @pytest.mark.parametrize(
        "args", [(1.0, 2.0, 1.0, 2, 20), (2.0, 1.5, 1.0, 2, 20), (2.0, 2.0, 1.0, 17, 20)]
    )
    def test_domain(self, args):
        with pytest.raises(DomainError):
            pen_kullback(*args)

    def test_upper_domain(self):
        with pytest.raises(DomainError):
            pen_kullback_upper(2.0, 2.0, 1.0, 0, 20)
        with pytest.raises(DomainError):
            pen_kullback_upper(2.0, 2.0, 1.0, 12, 20)


class TestClassical:
    @pytest.mark.parametrize("D,n", [(0, 10), (3, 32), (20, 100)])
    def test_fpe(self, D, n):
        assert pen_classical("fpe", D, n) == 2 * D

    @pytest.mark.parametrize(
        "kind,mult", [("aic", lambda n: 2.0), ("bic", math.log), ("amdl", lambda n: 3 * math.log(n))]
    )
    @pytest.mark.parametrize("D,n", [(1, 32), (5, 100), (30, 512)])
    def test_log_scale_matches_definition(self, kind, mult, D, n):
        # these penalties are linear in D on the log-likelihood scale
        pen = pen_classical(kind, D, n)
        assert pen_convert(pen, D, n) == pytest.approx(mult(n) * D, rel=1e-12)

    def test_case_insensitive(self):
        assert pen_classical("BIC", 3, 40) == pen_classical("bic", 3, 40)

    def test_ordering_at_moderate_n(self):
        D, n = 5, 100
        vals = [pen_classical(k, D, n) for k in ("aic", "bic", "amdl")]
        assert vals == sorted(vals)

    @pytest.mark.parametrize("args", [("aic", 10, 10), ("aic", -1, 10), ("cp", 2, 10)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            pen_classical(*args)


class TestConvert:
    @given(st.floats(0, 1e4), st.integers(0, 50), st.integers(1, 200))
    def test_roundtrip(self, pen, D, extra):
        n = D + extra
        back = pen_convert(pen_convert(pen, D, n), D, n, "from_prime")
        assert back == pytest.approx(pen, rel=1e-10, abs=1e-10)

    def test_same_choice_under_both_scales(self):
        rng = np.random.default_rng(3)
        n = 40
        for _ in range(50):
            rss = np.sort(rng.uniform(1, 10, 6))[::-1]
            pens = np.sort(rng.uniform(0, 20, 6))
            D = np.arange(6)
            mult = rss * (1 + pens / (n - D))
            loglik = n / 2 * np.log(rss / n) + np.array(
                [pen_convert(p, d, n) for p, d in zip(pens, D)]
            ) / 2
            assert np.argmin(mult) == np.argmin(loglik)

    def test_domain(self):
        with pytest.raises(DomainError):
            pen_convert(1.0, 5, 5)
        with pytest.raises(DomainError):
            pen_convert(1.0, 2, 5, "sideways")


class TestMinimal:
    def test_value(self):
        assert pen_minimal(2.0, 0.0, 3) == pytest.approx(12.0)

    def test_scaling(self):
        a = math.log(32)
        assert pen_minimal(1.5, a, 4) == pytest.approx(1.5**2 * phi_inv(a) * 4)

    def test_domain(self):
        with pytest.raises(DomainError):
            pen_minimal(1.5, 1.0, -1)


class TestHka:
    def test_reference_values(self):
        rep = hka_check(math.sqrt(2), 1.0, 0.0, 100, 10)
        assert rep.t == pytest.approx(math.sqrt(2))
        assert rep.gamma1 == pytest.approx(5.83, abs=5e-3)
        assert rep.gamma2 == pytest.approx(0.394, abs=5e-4)
        assert rep.feasible

    @given(st.floats(1.01, 20), st.floats(0, 50))
    def test_gamma2_at_most_half(self, K, a):
        rep = hka_check(K, 1.0, a, 100, 1)
        if rep.t > 1:
            assert rep.gamma2 <= 0.5 + 1e-12

    def test_cap_and_feasibility(self):
        rep = hka_check(1.5, 1.0, 0.0, 50, 1000)
        assert not rep.feasible
        expected = min(math.floor(50 - rep.gamma1), math.floor(52 * rep.gamma2 - 1))
        assert rep.d_max == expected > 0
        assert hka_check(1.5, 1.0, 0.0, 50, expected).feasible

    def test_infeasible_when_t_small(self):
        rep = hka_check(1.0 + 1e-12, 1.0, 0.0, 50, 1)
        assert not rep.feasible and rep.d_max == 0

    def test_domain(self):
        with pytest.raises(DomainError):
            hka_check(1.5, 1.0, 0.0, 0, 1)


class TestPenaltyRule:
    @pytest.mark.parametrize(
        "rule,expected",
        [
            (PenaltyRule.kl(1.1), lambda D, L, n: pen_kl(1.1, L, D, n)),
            (PenaltyRule.classical("AIC"), lambda D, L, n: pen_classical("aic", D, n)),
            (PenaltyRule.minimal(1.2, 1.0), lambda D, L, n: pen_minimal(1.2, 1.0, D)),
            (PenaltyRule.kullback(1.5), lambda D, L, n: pen_kullback(1.5, 2.5, L, D, n)),
        ],
    )
    def test_dispatch(self, rule, expected):
        for D, L in [(0, 0.0), (2, 3.0), (5, 7.5)]:
            assert rule(D, L, 40) == pytest.approx(expected(D, L, 40), rel=1e-14)

    def test_table(self):
        rule = PenaltyRule.from_table({0: 0.0, 1: 4.0})
        assert rule(1, 99.0, 10) == 4.0
        with pytest.raises(DomainError):
            rule(2, 0.0, 10)

    def test_labels_and_flags(self):
        assert PenaltyRule.kl(1.1).label == "K=1.1"
        assert PenaltyRule.classical("bic").label == "BIC"
        assert PenaltyRule.kl().uses_weights and not PenaltyRule.classical("aic").uses_weights

    def test_hashable_and_equal(self):
        a, b = PenaltyRule.from_table({1: 2.0}), PenaltyRule.from_table({1: 2.0})
        assert a == b and hash(a) == hash(b)
        assert len({PenaltyRule.kl(1.1), PenaltyRule.kl(1.1), PenaltyRule.kl(2.0)}) == 2

    @pytest.mark.parametrize(
        "kwargs", [dict(kind="kl", K=0.5), dict(kind="minimal", K=1.0), dict(kind="nope")]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            PenaltyRule(**kwargs)
