"""Tests for the completely symmetric criterion module."""

import numpy as np
import pytest
from scipy.special import ndtr

from ssdlasso.errors import DegenerateK, InvalidC
from ssdlasso.mvn import QmcConfig
from ssdlasso.symmetric import (
    SymCurveEvaluator,
    SymScenario,
    contour_grid,
    derivative_check,
    dprob_s_dc_at_zero,
    lemma3_boundary,
    lemma3_condition,
    psi_Lambda,
    psi_lambda,
    psi_lambda_pm,
    psi_max,
    sym_prob_I,
    sym_prob_S,
    sym_regions,
    theorem3_condition,
    theorem3_regions,
)

CFG = QmcConfig(seed=9)


def closed_psi(n, k, q, beta, lam):
    ps = ndtr(np.sqrt(n) * (beta - lam)) ** k
    pi = (2 * ndtr(lam * np.sqrt(n)) - 1.0) ** q
    return ps, pi


class TestSymScenario:
    def test_gamma(self):
        sym = SymScenario(10, 4, 6, 2.0, 0.3)
        assert sym.gamma == pytest.approx(0.3 / (1 + 0.3 * 3), abs=1e-15)

    def test_invalid_c(self):
        with pytest.raises(InvalidC):
            SymScenario(10, 4, 6, 2.0, -0.5)
        with pytest.raises(InvalidC):
            SymScenario(10, 4, 6, 2.0, 1.0)

    def test_i_event_needs_p_feasibility(self):
        # c in the k-interval but below -1/(p-1): inactive block indefinite
        sym = SymScenario(10, 4, 6, 2.0, -0.2)
        with pytest.raises(InvalidC):
            sym_prob_I(sym, np.ones(4, dtype=int), 1.0, CFG)


class TestClosedForms:
    def test_prob_s_at_zero(self):
        sym = SymScenario(10, 4, 6, 2.0, 0.0)
        est = sym_prob_S(sym, np.ones(4, dtype=int), 1.0, CFG)
        assert est.std_error == 0.0
        assert est.value == pytest.approx(0.9968728692927176, abs=1e-12)

    def test_prob_i_at_zero(self):
        sym = SymScenario(10, 4, 6, 2.0, 0.0)
        est = sym_prob_I(sym, np.ones(4, dtype=int), 1.0, CFG)
        assert est.std_error == 0.0
        assert est.value == pytest.approx(0.9906442670855712, abs=1e-12)

    def test_sign_independence_at_zero(self):
        sym = SymScenario(10, 4, 6, 2.0, 0.0)
        a = psi_lambda(sym, 0.7, CFG)
        b = psi_lambda_pm(sym, 0.7, CFG)
        assert a.value == pytest.approx(b.value, abs=1e-12)

    def test_qmc_path_matches_closed_form(self):
        sym = SymScenario(10, 4, 6, 2.0, 0.0)
        for lam in (0.3, 0.7, 1.2):
            qs = sym_prob_S(sym, np.ones(4, dtype=int), lam, CFG, method="qmc")
            qi = sym_prob_I(sym, np.ones(4, dtype=int), lam, CFG, method="qmc")
            ps, pi = closed_psi(10, 4, 6, 2.0, lam)
            assert abs(qs.value - ps) <= 3 * qs.std_error + 1e-4
            assert abs(qi.value - pi) <= 3 * qi.std_error + 1e-4

    def test_quadrature_vs_qmc_offzero(self):
        # positive c: I side is exact quadrature, compare with the engine
        sym = SymScenario(10, 4, 6, 2.0, 0.25)
        ones = np.ones(4, dtype=int)
        for lam in (0.4, 0.9):
            exact = sym_prob_I(sym, ones, lam, CFG)
            engine = sym_prob_I(sym, ones, lam, CFG, method="qmc")
            assert exact.std_error == 0.0
            assert abs(exact.value - engine.value) <= 3 * engine.std_error + 2e-4
        # negative c (feasible above -1/(p-1)): S side is exact quadrature
        sym_neg = SymScenario(10, 4, 6, 2.0, -0.09)
        for lam in (0.4, 0.9):
            exact = sym_prob_S(sym_neg, ones, lam, CFG)
            engine = sym_prob_S(sym_neg, ones, lam, CFG, method="qmc")
            assert exact.std_error == 0.0
            assert abs(exact.value - engine.value) <= 3 * engine.std_error + 2e-4

    def test_covariance_stays_pd(self):
        for c in (-0.05, 0.3, 0.9):
            sym = SymScenario(10, 4, 6, 2.0, c)
            rs, ri = sym_regions(sym, np.ones(4, dtype=int), 0.8)
            assert np.linalg.eigvalsh(rs.covariance).min() > 0
            assert np.linalg.eigvalsh(ri.covariance).min() > -1e-12

    def test_balanced_signs_zero_mean_i(self):
        sym = SymScenario(10, 4, 6, 2.0, 0.3)
        _, ri = sym_regions(sym, np.array([1, 1, -1, -1]), 0.8)
        assert np.allclose(ri.mean, 0.0)

    def test_beta_saturation(self):
        sym = SymScenario(10, 4, 6, 50.0, 0.2)
        est = sym_prob_S(sym, np.ones(4, dtype=int), 0.5, CFG)
        assert est.value > 1 - 1e-10


class TestPsiSummaries:
    def test_psi_lambda_curves_match_pointwise(self):
        ev = SymCurveEvaluator(SymScenario(10, 4, 6, 2.0, 0.2), "known", CFG)
        lams = np.array([0.3, 0.8, 1.5])
        c = ev.curve(lams)
        for i, lam in enumerate(lams):
            direct = psi_lambda(SymScenario(10, 4, 6, 2.0, 0.2), float(lam), CFG)
            tol = 3 * (c["std_error"][i] + direct.std_error) + 1e-4
            assert abs(c["value"][i] - direct.value) <= tol

    def test_psi_Lambda_closed_vs_engine_at_zero(self):
        # two independent code paths: closed forms vs forced QMC events
        val_closed = psi_Lambda(10, 4, 6, 2.0, 0.0, "known", CFG)
        ev = SymCurveEvaluator(SymScenario(10, 4, 6, 2.0, 0.0), "known", CFG)

        def noisy(lam):
            qs = sym_prob_S(SymScenario(10, 4, 6, 2.0, 0.0), np.ones(4, dtype=int), lam, CFG, "qmc")
            qi = sym_prob_I(SymScenario(10, 4, 6, 2.0, 0.0), np.ones(4, dtype=int), lam, CFG, "qmc")
            return qs.value * qi.value

        from ssdlasso.recovery import phi_Lambda

        val_qmc = phi_Lambda(noisy, -5.0, 0.05, 1e-6)
        assert val_closed.value == pytest.approx(
            val_qmc.value * 0.05 / 0.05, rel=0.02
        )

    def test_known_sign_paper_ordering(self):
        # psi_Lambda(0.14) > psi_Lambda(0) for the n=10, k=4, q=6, beta=2 case
        v14 = psi_Lambda(10, 4, 6, 2.0, 0.14, "known", CFG)
        v0 = psi_Lambda(10, 4, 6, 2.0, 0.0, "known", CFG)
        assert v14.value > v0.value

    def test_psi_max_flat_zero(self):
        assert psi_max(10, 2, 3, 1e-6, 0.0, "known", CFG, (-2.0, -1.0), 8).value < 1e-6

    def test_k1_pm_equals_known(self):
        a = psi_lambda(SymScenario(10, 1, 6, 2.0, 0.2), 0.8, CFG)
        b = psi_lambda_pm(SymScenario(10, 1, 6, 2.0, 0.2), 0.8, CFG)
        assert a.value == pytest.approx(b.value, abs=1e-12)


class TestConditions:
    def test_lemma3_boundary_paper_value(self):
        w = lemma3_boundary(10, 2.0)
        assert w == pytest.approx(-22.763, abs=0.05)

    def test_lemma3_at_lambda_equals_beta(self):
        r = lemma3_condition(10, 2.0, 2.0)
        assert r.rhs == pytest.approx(0.7978845608, abs=1e-9)
        assert r.holds == (2 * 2.0 * np.sqrt(10) >= r.rhs)

    def test_lemma3_large_beta(self):
        r = lemma3_condition(10, 100.0, 0.5)
        assert r.rhs < 1e-100
        assert r.holds

    def test_theorem3_region_paper_values(self):
        regions = theorem3_regions(10, 4, 6, 2.0, (-3.0, 3.0))
        assert len(regions) == 1
        lo, hi = regions[0]
        assert lo == pytest.approx(-0.988, abs=0.01)
        assert hi == pytest.approx(0.640, abs=0.01)

    def test_theorem3_k1_guard(self):
        with pytest.raises(DegenerateK):
            theorem3_condition(10, 1, 6, 2.0, 0.5)

    def test_lemma3_small_lambda_fails(self):
        r = lemma3_condition(10, 2.0, np.exp(-23.5))
        assert not r.holds


class TestDerivatives:
    def test_fd_matches_analytic_dps(self):
        # finite difference of P(S) in c against the analytic expression
        n, k, q, beta, lam = 10, 4, 6, 2.0, 1.0
        h = 5e-3
        up = sym_prob_S(SymScenario(n, k, q, beta, h), np.ones(k, dtype=int), lam, CFG)
        dn = sym_prob_S(SymScenario(n, k, q, beta, -h), np.ones(k, dtype=int), lam, CFG)
        fd = (up.value - dn.value) / (2 * h)
        expected = dprob_s_dc_at_zero(n, k, beta, lam)
        assert fd == pytest.approx(expected, rel=0.05)

    def test_derivative_check_reports(self):
        out = derivative_check(10, 4, 6, 2.0, 1.0, QmcConfig(sample_budget=8192, seed=5))
        assert out["prob_i"].consistent
        assert out["psi_pm"].consistent
        assert out["psi"].prediction == "positive"
        assert out["psi"].estimate > 0
        assert out["psi"].consistent


class TestContour:
    def test_single_cell(self):
        rows = contour_grid(10, 4, 6, 2.0, "known", (0.1, 0.1), (0.0, 0.0), 1, CFG)
        assert len(rows) == 1
        direct = psi_lambda(SymScenario(10, 4, 6, 2.0, 0.1), 1.0, CFG)
        assert rows[0][2] == pytest.approx(direct.value, abs=1e-6)

    def test_zero_c_row_closed_form(self):
        rows = contour_grid(10, 4, 6, 2.0, "known", (0.0, 0.0), (-1.0, 1.0), 3, CFG)
        for _, w, v in rows:
            ps, pi = closed_psi(10, 4, 6, 2.0, np.exp(w))
            assert v == pytest.approx(ps * pi, abs=1e-10)

    def test_grid_is_row_major(self):
        rows = contour_grid(10, 3, 5, 2.0, "known", (0.0, 0.2), (-1.0, 0.0), 2, CFG)
        cs = [r[0] for r in rows]
        assert cs == sorted(cs)
        assert len(rows) == 4
