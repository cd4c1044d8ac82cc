"""Tests for designs, standardization, and heuristic criteria."""

import numpy as np
import pytest
from scipy.linalg import hadamard

from ssdlasso.design import (
    Design,
    heuristics,
    load_design_csv,
    random_design,
    save_design_csv,
    standardize,
    submatrix_views,
    ue2_efficiency,
)
from ssdlasso.errors import DegenerateSupport, InputError, SingularCA, ZeroUe2


def hadamard_design(n, p):
    """p non-constant columns of a Hadamard matrix: balanced, orthogonal."""
    H = hadamard(n)
    return Design(H[:, 1 : p + 1].astype(np.int8))


class TestDesign:
    def test_rejects_non_pm1(self):
        with pytest.raises(InputError):
            Design(np.array([[1, 0], [1, -1]]))

    def test_rejects_tiny(self):
        with pytest.raises(InputError):
            Design(np.array([[1, -1]]))

    def test_csv_round_trip(self, tmp_path):
        d = random_design(6, 4, np.random.default_rng(0))
        path = tmp_path / "d.csv"
        save_design_csv(d, path)
        back = load_design_csv(path)
        assert np.array_equal(back.X, d.X)

    def test_csv_rejects_bad_token(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,-1\n1,2\n")
        with pytest.raises(InputError):
            load_design_csv(path)


class TestStandardize:
    def test_hadamard_orthogonal(self):
        std = standardize(hadamard_design(4, 3))
        assert np.allclose(std.C, np.eye(3), atol=1e-12)
        assert np.allclose(std.V, np.ones(3), atol=1e-12)
        assert not std.degenerate_columns

    def test_constant_column_degenerate(self):
        d = Design(np.array([[1, 1], [1, -1]]))
        std = standardize(d)
        assert std.degenerate_columns == {0}
        assert std.V[0] == 0.0
        assert np.allclose(std.F[:, 0], 0.0)

    def test_unit_diagonal(self):
        d = random_design(9, 10, np.random.default_rng(1))
        std = standardize(d)
        live = [j for j in range(10) if j not in std.degenerate_columns]
        assert np.allclose(np.diag(std.C)[live], 1.0, atol=1e-10)

    def test_columns_centered(self):
        d = random_design(7, 5, np.random.default_rng(2))
        std = standardize(d)
        assert np.abs(std.F.sum(axis=0)).max() < 1e-10

    def test_c_equals_normalized_gram(self):
        d = random_design(8, 6, np.random.default_rng(3))
        std = standardize(d)
        assert np.allclose(std.C, std.F.T @ std.F / d.n, atol=1e-12)


class TestHeuristics:
    def test_orthogonal_zeroes(self):
        h = heuristics(hadamard_design(4, 3))
        assert h.ue_s2 == 0.0
        assert h.ue_s == 0.0
        assert h.var_s == 0.0
        assert h.e_s2 == 0.0

    def test_two_run_example(self):
        # s_01 = 2, s_02 = 0, s_12 = 0 over 3 pairs
        h = heuristics(Design(np.array([[1, 1], [1, -1]])))
        assert h.ue_s2 == pytest.approx(4 / 3)
        assert h.ue_s == pytest.approx(2 / 3)
        assert h.var_s == pytest.approx(8 / 9)

    def test_duplicated_column_contributes_n_squared(self):
        X = np.array([[1, 1], [-1, -1], [1, 1], [-1, -1]])
        d = Design(X)
        S_raw = heuristics(d).ue_s2 * 3  # 3 pairs for p = 2
        assert S_raw == pytest.approx(16.0)  # only s_12 = n = 4 is nonzero

    def test_column_permutation_invariant(self):
        rng = np.random.default_rng(5)
        d = random_design(9, 7, rng)
        perm = rng.permutation(7)
        assert heuristics(d) == heuristics(d.permute_columns(perm))

    def test_sign_flip_preserves_ue_s2(self):
        rng = np.random.default_rng(6)
        d = random_design(9, 7, rng)
        signs = rng.choice([-1, 1], size=7)
        flipped = d.flip_columns(signs)
        assert heuristics(flipped).ue_s2 == pytest.approx(heuristics(d).ue_s2)

    def test_e_s2_absent_when_unbalanced(self):
        d = Design(np.array([[1, 1], [1, -1], [1, 1]]))  # column 0 constant
        assert heuristics(d).e_s2 is None

    def test_hadamard_family_zero(self):
        for n in (4, 8, 16):
            h = heuristics(hadamard_design(n, n - 1))
            assert h.ue_s2 == 0.0 and h.var_s == 0.0


class TestUe2Efficiency:
    def test_self(self):
        d = random_design(9, 10, np.random.default_rng(7))
        ref = heuristics(d).ue_s2
        assert ue2_efficiency(d, ref) == pytest.approx(1.0)

    def test_ratio(self):
        d = random_design(9, 10, np.random.default_rng(8))
        ref = heuristics(d).ue_s2
        assert ue2_efficiency(d, ref / 2) == pytest.approx(0.5)

    def test_zero_ue2(self):
        d = hadamard_design(4, 3)
        assert ue2_efficiency(d, 0.0) == 1.0
        with pytest.raises(ZeroUe2):
            ue2_efficiency(d, 1.0)


class TestSubmatrixViews:
    def test_orthogonal_blocks(self):
        std = standardize(hadamard_design(4, 3))
        v = submatrix_views(std, (0, 1))
        assert np.allclose(v.C_A, np.eye(2), atol=1e-12)
        assert np.allclose(v.C_IA, 0.0, atol=1e-12)

    def test_full_support_empty_inactive(self):
        std = standardize(hadamard_design(4, 3))
        v = submatrix_views(std, (0, 1, 2))
        assert v.C_I.shape == (0, 0)
        assert v.C_IA.shape == (0, 3)

    def test_duplicated_column_singular(self):
        X = np.hstack([np.ones((4, 1)), np.ones((4, 1))]) * np.array([[1], [-1], [1], [-1]])
        std = standardize(Design(X.astype(np.int8)))
        with pytest.raises(SingularCA):
            submatrix_views(std, (0, 1))

    def test_degenerate_support_rejected(self):
        d = Design(np.array([[1, 1], [1, -1], [1, 1]]))
        std = standardize(d)
        with pytest.raises(DegenerateSupport):
            submatrix_views(std, (0,))
