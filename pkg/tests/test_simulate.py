import csv
import io
import math

import numpy as np
import pytest

from gmsel.errors import DomainError
from gmsel.numerics import RngStream
from gmsel.penalties import PenaltyRule
from gmsel.selectors import select_nonzero
from gmsel.simulate import (
    SimConfig,
    SimRow,
    _config_id,
    emit_penalty_curve,
    k_grid,
    nonzero_p,
    oracle_nonzero,
    run_study,
    theta1_design,
    theta2_design,
)


def test_grid_helpers():
    assert nonzero_p(32) == 9
    assert nonzero_p(512) == 82
    assert k_grid(9) == [0, 1, 2, 4, 8, 9]


@pytest.mark.parametrize(
    "n,p,k,s,expected",
    [(32, 9, 0, 0.0, 0.0), (32, 9, 1, 5.0, 1.0), (32, 9, 4, 0.5, 1.0), (512, 82, 32, 5.0, 32.0)],
)
def test_oracle_nonzero(n, p, k, s, expected):
    assert oracle_nonzero(n, p, k, s) == pytest.approx(expected)


class TestNonzeroStudy:
    def test_deterministic(self):
        cfg = dict(study="nonzero", reps=50, k_list=[0, 2], s_list=[4.0])
        a = run_study(SimConfig(**cfg)).to_csv()
        b = run_study(SimConfig(**cfg)).to_csv()
        assert a == b

    def test_seed_changes_results(self):
        a = run_study(SimConfig(reps=50, k_list=[2], s_list=[3.0], master_seed=1))
        b = run_study(SimConfig(reps=50, k_list=[2], s_list=[3.0], master_seed=2))
        assert a.rows[0].R != b.rows[0].R

    def test_matches_selector_replicate_by_replicate(self):
        n, k, s, reps, seed = 32, 2, 4.0, 10, 99
        report = run_study(SimConfig(reps=reps, k_list=[k], s_list=[s], master_seed=seed, criteria=[]))
        row = report.one(criterion="K=1.1")
        mu = np.zeros(n)
        mu[:k] = s
        cid = _config_id("nonzero", n, k, s)
        dims, losses = [], []
        for rep in range(reps):
            y = mu + RngStream(seed, (cid << 32) | rep).generator().standard_normal(n)
            out = select_nonzero(y, nonzero_p(n), PenaltyRule.kl(1.1))
            dims.append(out.dim)
            losses.append(float(np.sum((out.fit.mu_hat - mu) ** 2)))
        assert row.mean_D == pytest.approx(np.mean(dims))
        assert row.R == pytest.approx(np.mean(losses), rel=1e-12)

    def test_rows_and_fractions(self):
        report = run_study(SimConfig(reps=200, k_list=[0]))
        assert [r.criterion for r in report.rows] == ["K=1.1", "aic", "bic", "amdl"]
        for r in report.rows:
            assert r.frac_D0 + r.frac_D1 + r.frac_D2plus == pytest.approx(1.0)
            assert r.frac_Dpos == pytest.approx(1 - r.frac_D0)
            assert math.isnan(r.r)  # no oracle ratio when k = 0

    def test_k_outside_grid(self):
        with pytest.raises(DomainError):
            run_study(SimConfig(reps=5, k_list=[20]))


class TestVarsel:
    def test_theta2_design(self):
        X, mu = theta2_design(20)
        np.testing.assert_allclose(np.linalg.norm(X, axis=0), 1.0)
        coef, *_ = np.linalg.lstsq(X[:, :2], mu, rcond=None)
        np.testing.assert_allclose(X[:, :2] @ coef, mu, atol=1e-8)

    def test_theta1_design_reproducible(self):
        np.testing.assert_array_equal(theta1_design(3, 7), theta1_design(3, 7))
        assert not np.array_equal(theta1_design(3, 7), theta1_design(4, 7))

    def test_theta2_small_run(self):
        row = run_study(SimConfig(study="theta2", reps=10)).one(design="fixed")
        assert row.p == 8 and row.k == 2
        assert row.freq_eq_m0 <= row.freq_sup_m0
        # the oracle keeps the two true columns and pays 2 sigma^2
        assert row.O == pytest.approx(2.0, abs=1e-8)

    def test_theta1_pooled(self):
        report = run_study(SimConfig(study="theta1", reps=5, designs=3, sigma_list=[1.0]))
        assert len(report.rows) == 4
        pooled = report.one(design="pooled")
        per = report.rows[:3]
        assert pooled.R == pytest.approx(np.mean([r.R for r in per]))
        assert pooled.reps == 15
        for r in report.rows:
            assert r.freq_eq_m0 <= r.freq_sup_m0


def test_overfit_demo():
    report = run_study(SimConfig(study="overfit", reps=100))
    chain = report.rows[0]
    assert chain.criterion == "chain C=0.5"
    assert chain.freq_sup_m0 > 0.9
    aic = report.one(criterion="aic")
    assert aic.frac_Dpos > 0.9


class TestPenaltyCurve:
    def test_monotone(self):
        rows = emit_penalty_curve(512, 1.1, 82)
        kl = [r[2] for r in rows]
        amdl = [r[1] for r in rows]
        assert all(b > a for a, b in zip(kl, kl[1:]))
        assert all(b > a for a, b in zip(amdl, amdl[1:]))

    def test_amdl_above_data_driven_mid_range(self):
        rows = emit_penalty_curve(512, 1.1, 82)
        assert all(amdl > kl for D, amdl, kl in rows if 10 <= D <= 60)

    def test_domain(self):
        with pytest.raises(DomainError):
            emit_penalty_curve(32, 1.1, 31)


class TestReport:
    def test_csv_roundtrip(self):
        report = run_study(SimConfig(reps=20, k_list=[1], s_list=[3.0], criteria=["bic"]))
        rows = list(csv.DictReader(io.StringIO(report.to_csv())))
        assert len(rows) == 2
        assert float(rows[0]["R"]) == pytest.approx(report.rows[0].R, rel=1e-5)

    def test_markdown(self):
        md = run_study(SimConfig(reps=20, k_list=[0], criteria=[])).to_markdown()
        lines = md.strip().splitlines()
        assert lines[0].startswith("| study |") and len(lines) == 3
        assert "%" in lines[2]

    def test_one_raises(self):
        report = run_study(SimConfig(reps=5, k_list=[0], criteria=[]))
        with pytest.raises(KeyError):
            report.one(criterion="aic")

    def test_binomial_se(self):
        assert SimRow.binomial_se(0.5, 100) == pytest.approx(0.05)


@pytest.mark.parametrize(
    "kwargs", [dict(study="bogus"), dict(reps=0), dict(master_seed=-1), dict(K_list=[0.5])]
)
def test_invalid_config(kwargs):
    with pytest.raises(DomainError):
        SimConfig(**kwargs)
