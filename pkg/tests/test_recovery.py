"""Tests for sign-recovery criteria: event probabilities, summaries, curves."""

import numpy as np
import pytest
from scipy.linalg import hadamard
from scipy.special import ndtr

from ssdlasso.design import Design, random_design, standardize
from ssdlasso.errors import NonPositiveStep, TooManySigns
from ssdlasso.mvn import QmcConfig
from ssdlasso.recovery import (
    CriterionValue,
    Phi_Lambda,
    Phi_lambda,
    Phi_max,
    Scenario,
    SignVectorSet,
    SupportSet,
    criterion_curve,
    phi_Lambda,
    phi_lambda,
    phi_lambda_pm,
    phi_max,
    prob_I,
    prob_S,
    support_recovery_prob,
)
from ssdlasso.construct import block_construction, proposition1_pad

CFG = QmcConfig(seed=42)


def hadamard_design(n, p):
    H = hadamard(n)
    return Design(H[:, 1 : p + 1].astype(np.int8))


def orthogonal_phi(n, k, q, beta, lam):
    """Closed form for orthogonal active and inactive blocks (V = I)."""
    ps = ndtr(np.sqrt(n) * (beta - lam)) ** k
    pi = (2 * ndtr(lam * np.sqrt(n)) - 1.0) ** q
    return ps, pi


class TestProbS:
    def test_orthogonal_closed_form(self):
        n, k = 8, 3
        std = standardize(hadamard_design(n, k))
        beta, lam = 1.2, 0.4
        sc = Scenario(tuple(range(k)), beta, np.array([1, -1, 1]), lam)
        est = prob_S(std, sc, CFG)
        expected = ndtr(np.sqrt(n) * (beta - lam)) ** k
        assert abs(est.value - expected) <= 3 * est.std_error + 1e-4

    def test_small_lambda_limit(self):
        n, k = 8, 2
        std = standardize(hadamard_design(n, k))
        sc = Scenario((0, 1), 3.0, np.array([1, 1]), 1e-8)
        est = prob_S(std, sc, CFG)
        expected = ndtr(np.sqrt(n) * 3.0) ** k
        assert abs(est.value - expected) <= 3 * est.std_error + 1e-6

    def test_huge_beta_saturates(self):
        std = standardize(hadamard_design(8, 2))
        sc = Scenario((0, 1), 100.0, np.array([1, 1]), 1.0)
        est = prob_S(std, sc, CFG)
        assert est.value > 1 - 1e-12


class TestProbI:
    def test_padded_design_exact_one(self):
        active = block_construction(8, 3, 2)
        padded = proposition1_pad(active, 7)
        std = standardize(padded)
        est = prob_I(std, (0, 1, 2), np.ones(3), 0.7, CFG)
        assert est == pytest.approx((1.0, 0.0, 0), abs=0) or (
            est.value == 1.0 and est.std_error == 0.0
        )

    def test_orthogonal_inactive_block(self):
        n, p, k = 8, 7, 2
        std = standardize(hadamard_design(n, p))
        lam = 0.6
        est = prob_I(std, (0, 1), np.ones(2), lam, CFG)
        expected = (2 * ndtr(lam * np.sqrt(n)) - 1.0) ** (p - k)
        assert abs(est.value - expected) <= 3 * est.std_error + 3e-4

    def test_large_lambda_saturates(self):
        std = standardize(hadamard_design(8, 7))
        est = prob_I(std, (0, 1), np.ones(2), 50.0, CFG)
        assert est.value > 1 - 1e-9

    def test_depends_only_on_signs_not_magnitudes(self):
        # the I event's distribution involves beta only through z
        std = standardize(random_design(8, 10, np.random.default_rng(0)))
        a = prob_I(std, (0, 3), np.array([1, -1]), 0.5, CFG)
        b = prob_I(std, (0, 3), np.array([1, -1]), 0.5, CFG)
        assert a.value == b.value  # deterministic and magnitude-free by signature


class TestPhiLambda:
    def test_hadamard_closed_form(self):
        # n=8 Hadamard, p=7, k=2, beta=1, lambda=0.5
        n, p, k, beta, lam = 8, 7, 2, 1.0, 0.5
        std = standardize(hadamard_design(n, p))
        sc = Scenario((0, 1), beta, np.ones(k, dtype=int), lam)
        cv = phi_lambda(std, sc, CFG)
        ps, pi = orthogonal_phi(n, k, p - k, beta, lam)
        assert abs(cv.value - ps * pi) <= 3 * cv.std_error + 5e-4

    def test_reflection_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            d = random_design(10, 8, rng)
            std = standardize(d)
            signs = rng.choice([-1, 1], size=3)
            sc_pos = Scenario((0, 2, 5), 1.5, signs, 0.4)
            sc_neg = Scenario((0, 2, 5), 1.5, -signs, 0.4)
            a = phi_lambda(std, sc_pos, CFG)
            b = phi_lambda(std, sc_neg, CFG)
            tol = 3 * (a.std_error + b.std_error) + 1e-3
            assert abs(a.value - b.value) <= tol

    def test_theorem1_column_flip_equivalence(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            d = random_design(10, 8, rng)
            zt = rng.choice([-1, 1], size=8)
            flipped = d.flip_columns(zt)
            support = (1, 4, 6)
            signs = zt[list(support)]
            a = phi_lambda(standardize(d), Scenario(support, 2.0, signs, 0.5), CFG)
            b = phi_lambda(
                standardize(flipped), Scenario(support, 2.0, np.ones(3, dtype=int), 0.5), CFG
            )
            tol = 3 * (a.std_error + b.std_error) + 1e-3
            assert abs(a.value - b.value) <= tol

    def test_monotone_in_beta(self):
        std = standardize(random_design(10, 8, np.random.default_rng(3)))
        lam = 0.5
        values = []
        for beta in (0.5, 1.0, 2.0, 4.0):
            sc = Scenario((0, 1), beta, np.ones(2, dtype=int), lam)
            values.append(prob_S(std, sc, CFG))
        for a, b in zip(values, values[1:]):
            assert b.value >= a.value - 3 * (a.std_error + b.std_error)

    def test_padded_design_phi_equals_prob_s(self):
        active = block_construction(8, 3, 2)
        padded = proposition1_pad(active, 7)
        std = standardize(padded)
        sc = Scenario((0, 1, 2), 1.0, np.ones(3, dtype=int), 0.5)
        cv = phi_lambda(std, sc, CFG)
        ps = prob_S(std, sc, CFG)
        assert cv.p_i == 1.0
        assert cv.value == pytest.approx(ps.value, abs=1e-12)


class TestPhiPm:
    def test_k1_single_class(self):
        std = standardize(hadamard_design(8, 5))
        ss = SignVectorSet.all_half(1)
        cv = phi_lambda_pm(std, (0,), 1.0, 0.5, ss, CFG)
        sc = Scenario((0,), 1.0, np.ones(1, dtype=int), 0.5)
        direct = phi_lambda(std, sc, CFG)
        assert cv.value == pytest.approx(direct.value, abs=3 * (cv.std_error + direct.std_error) + 1e-4)

    def test_orthogonal_sign_invariance(self):
        std = standardize(hadamard_design(8, 7))
        vals = []
        for z in ((1, 1, 1), (1, -1, 1), (1, 1, -1), (1, -1, -1)):
            sc = Scenario((0, 1, 2), 1.0, np.asarray(z), 0.5)
            vals.append(phi_lambda(std, sc, CFG).value)
        assert max(vals) - min(vals) < 2e-3

    def test_half_equals_full_average(self):
        std = standardize(random_design(10, 6, np.random.default_rng(4)))
        support, beta, lam = (0, 2, 4), 1.5, 0.4
        half = phi_lambda_pm(std, support, beta, lam, SignVectorSet.all_half(3), CFG)
        full_vals = []
        import itertools
        for z in itertools.product((1, -1), repeat=3):
            sc = Scenario(support, beta, np.asarray(z), lam)
            full_vals.append(phi_lambda(std, sc, CFG).value)
        assert half.value == pytest.approx(np.mean(full_vals), abs=2e-3)


class TestPhiSummaries:
    def test_phi_max_known_maximum(self):
        m = -0.7

        def f(lam):
            return float(np.exp(-((np.log(lam) - m) ** 2)))

        res = phi_max(f, (-3.0, 2.0), 16)
        assert np.log(res.lambda_at) == pytest.approx(m, abs=1e-6)
        assert res.value == pytest.approx(1.0, abs=1e-10)

    def test_phi_max_flat_zero(self):
        res = phi_max(lambda lam: 0.0, (-2.0, 2.0), 8)
        assert res.value == 0.0

    def test_phi_max_matches_dense_grid(self):
        # orthogonal closed-form phi for k=2, q=5; oracle = dense scan
        n, k, q, beta = 8, 2, 5, 1.0

        def f(lam):
            ps, pi = orthogonal_phi(n, k, q, beta, lam)
            return float(ps * pi)

        ws = np.linspace(-5, 2, 10001)
        dense = max(f(float(np.exp(w))) for w in ws)
        res = phi_max(f, (-5.0, 2.0), 33)
        assert res.value == pytest.approx(dense, abs=1e-4)

    def test_phi_lambda_pulse(self):
        def pulse(lam):
            return 1.0 if 0.0 <= np.log(lam) <= 2.0 else 0.0

        res = phi_Lambda(pulse, -5.0, 0.01, 1e-6)
        assert res.value == pytest.approx(2.0, abs=0.02)

    def test_phi_lambda_zero_curve(self):
        res = phi_Lambda(lambda lam: 0.0, -5.0, 0.05, 1e-6)
        assert res.value == 0.0

    def test_phi_lambda_rejects_bad_step(self):
        with pytest.raises(NonPositiveStep):
            phi_Lambda(lambda lam: 1.0, -5.0, 0.0, 1e-6)

    def test_phi_lambda_step_convergence(self):
        def smooth(lam):
            w = np.log(lam)
            return float(np.exp(-((w - 0.3) ** 2) / 0.5))

        coarse = phi_Lambda(smooth, -5.0, 0.04, 0.0).value
        fine = phi_Lambda(smooth, -5.0, 0.02, 0.0).value
        assert abs(coarse - fine) / fine < 0.02


class TestCurveEvaluator:
    def test_matches_fixed_lambda_path(self):
        std = standardize(random_design(10, 8, np.random.default_rng(5)))
        supports = SupportSet.explicit([(0, 1), (2, 3), (4, 5)])
        ev = criterion_curve(std, 2, 1.5, supports, None, CFG)
        for lam in (0.2, 0.5, 1.0):
            via_curve = ev(lam)
            direct = Phi_lambda(std, 2, 1.5, lam, supports, None, CFG)
            tol = 3 * (via_curve.std_error + direct.std_error) + 2e-3
            assert abs(via_curve.value - direct.value) <= tol

    def test_curve_deterministic(self):
        std = standardize(random_design(9, 7, np.random.default_rng(6)))
        supports = SupportSet.explicit([(0, 1), (1, 2)])
        a = criterion_curve(std, 2, 1.0, supports, None, CFG).curve([0.3, 0.6])
        b = criterion_curve(std, 2, 1.0, supports, None, CFG).curve([0.3, 0.6])
        assert np.array_equal(a["value"], b["value"])

    def test_permutation_invariance_exhaustive(self):
        rng = np.random.default_rng(7)
        d = random_design(9, 6, rng)
        perm = rng.permutation(6)
        lam = 0.5
        cv1 = Phi_lambda(standardize(d), 2, 2.0, lam, SupportSet.exhaustive(6, 2), None, CFG)
        cv2 = Phi_lambda(
            standardize(d.permute_columns(perm)), 2, 2.0, lam, SupportSet.exhaustive(6, 2), None, CFG
        )
        tol = 3 * (cv1.std_error + cv2.std_error) + 1e-3
        assert abs(cv1.value - cv2.value) <= tol

    def test_singular_supports_counted_and_scored_zero(self):
        X = np.array([[1, 1, -1], [-1, -1, 1], [1, 1, 1], [-1, -1, -1]])
        std = standardize(Design(X))
        supports = SupportSet.exhaustive(3, 2)  # support (0,1) is aliased
        cv = Phi_lambda(std, 2, 1.0, 0.5, supports, None, CFG)
        assert cv.diagnostics["singular_supports"] == 1
        ev = criterion_curve(std, 2, 1.0, supports, None, CFG)
        assert ev.singular_supports == 1

    def test_phi_max_on_design_curve(self):
        n, p, k, beta = 8, 7, 2, 1.0
        std = standardize(hadamard_design(n, p))
        res = Phi_max(std, k, beta, SupportSet.exhaustive(p, k), None, QmcConfig(seed=3))

        def f(lam):
            ps, pi = orthogonal_phi(n, k, p - k, beta, lam)
            return float(ps * pi)

        ws = np.linspace(-5, 2, 4001)
        dense = max(f(float(np.exp(w))) for w in ws)
        assert res.value == pytest.approx(dense, abs=4e-3)


class TestSupportRecovery:
    def test_k1_is_superset_probability(self):
        std = standardize(hadamard_design(8, 5))
        sc = Scenario((0,), 1.0, np.ones(1, dtype=int), 0.5)
        sup = support_recovery_prob(std, sc, CFG)
        sign = phi_lambda(std, sc, CFG)
        assert sup.value >= sign.value - 3 * (sup.std_error + sign.std_error)

    def test_large_beta_collapses_to_sign(self):
        std = standardize(hadamard_design(8, 5))
        sc = Scenario((0, 1), 50.0, np.ones(2, dtype=int), 0.5)
        sup = support_recovery_prob(std, sc, CFG)
        sign = phi_lambda(std, sc, CFG)
        assert abs(sup.value - sign.value) < 1e-3

    def test_guard(self):
        std = standardize(random_design(16, 14, np.random.default_rng(8)))
        sc = Scenario(tuple(range(13)), 1.0, np.ones(13, dtype=int), 0.5)
        with pytest.raises(TooManySigns):
            support_recovery_prob(std, sc, CFG)
