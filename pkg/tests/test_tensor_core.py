"""Tests for matricization, mode products and CP algebra."""

import numpy as np
import pytest

from src.errors import ShapeError
from src.sketching import make_rng
from src.tensor_core import (
    as_matrix,
    as_tensor3,
    cp_reconstruct,
    fold,
    fold1,
    frobenius_norm,
    hadamard,
    khatri_rao,
    mode_product,
    numerical_rank,
    principal_angles,
    spectrum,
    tensor_norm,
    unfold,
    unfold1,
)


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


class TestValidation:
    """Test array validation."""

    def test_rejects_wrong_rank(self):
        """Test that a vector is not accepted as a matrix."""
        with pytest.raises(ShapeError):
            as_matrix(np.ones(4))
        with pytest.raises(ShapeError):
            as_tensor3(np.ones((2, 2)))

    def test_rejects_empty_and_non_finite(self):
        """Test that empty and NaN-bearing arrays are malformed."""
        with pytest.raises(ShapeError):
            as_matrix(np.ones((0, 3)))
        bad = np.ones((2, 2))
        bad[0, 1] = np.nan
        with pytest.raises(ShapeError):
            as_matrix(bad)

    def test_converts_to_float64(self):
        """Test integer input is promoted."""
        assert as_matrix([[1, 2], [3, 4]]).dtype == np.float64


class TestUnfold:
    """Test mode-n matricization."""

    def test_mode1_element_mapping(self):
        """Test element (i, j, l) lands at row i, column j + l*n2."""
        T = np.arange(24, dtype=float).reshape(2, 3, 4)
        X1 = unfold1(T)
        assert X1.shape == (2, 12)
        for i in range(2):
            for j in range(3):
                for l in range(4):
                    assert X1[i, j + l * 3] == T[i, j, l]

    def test_mode2_and_mode3_element_mapping(self):
        """Test the mode-2 and mode-3 fiber orderings."""
        T = np.arange(24, dtype=float).reshape(2, 3, 4)
        X2, X3 = unfold(T, 2), unfold(T, 3)
        assert X2.shape == (3, 8) and X3.shape == (4, 6)
        assert X2[1, 1 + 3 * 2] == T[1, 1, 3]
        assert X3[2, 1 + 2 * 2] == T[1, 2, 2]

    def test_invalid_mode(self):
        """Test that modes are 1-based."""
        with pytest.raises(ShapeError):
            unfold(np.ones((2, 2, 2)), 0)

    @pytest.mark.parametrize("seed", range(200))
    def test_fold1_inverts_unfold1(self, seed):
        """Test fold1(unfold1(T)) == T on random dims up to 6."""
        rng = make_rng(seed)
        dims = tuple(int(d) for d in rng.integers(1, 7, size=3))
        T = rng.standard_normal(dims)
        assert np.array_equal(fold1(unfold1(T), dims), T)

    @pytest.mark.parametrize("mode", [1, 2, 3])
    def test_fold_inverts_unfold_every_mode(self, mode):
        """Test the generic fold for each mode."""
        T = make_rng(mode).standard_normal((3, 4, 5))
        assert np.array_equal(fold(unfold(T, mode), mode, T.shape), T)

    def test_fold_rejects_wrong_shape(self):
        """Test folding into incompatible dims."""
        with pytest.raises(ShapeError):
            fold1(np.ones((2, 5)), (2, 3, 2))


class TestModeProduct:
    """Test the mode-n product."""

    @pytest.mark.parametrize("mode", [1, 2, 3])
    def test_matricization_law_is_exact(self, mode):
        """Test unfold_n(T x_n M) == M unfold_n(T) bit for bit."""
        rng = make_rng(10 + mode)
        T = rng.standard_normal((4, 5, 6))
        M = rng.standard_normal((3, T.shape[mode - 1]))
        assert np.array_equal(unfold(mode_product(T, M, mode), mode), M @ unfold(T, mode))

    @pytest.mark.parametrize("seed", range(200))
    def test_distinct_modes_commute(self, seed):
        """Test (T x_1 A) x_2 B == (T x_2 B) x_1 A."""
        rng = make_rng(seed)
        T = rng.standard_normal((4, 5, 3))
        A = rng.standard_normal((2, 4))
        B = rng.standard_normal((6, 5))
        left = mode_product(mode_product(T, A, 1), B, 2)
        right = mode_product(mode_product(T, B, 2), A, 1)
        assert np.max(np.abs(left - right)) <= 1e-13 * tensor_norm(left)

    def test_shape_mismatch(self):
        """Test that the matrix must match the mode size."""
        with pytest.raises(ShapeError):
            mode_product(np.ones((2, 3, 4)), np.ones((2, 5)), 2)


class TestKhatriRao:
    """Test Khatri-Rao and CP reconstruction."""

    def test_columns_are_kronecker_products(self, rng):
        """Test column j of A (.) B is kron(a_j, b_j)."""
        A = rng.standard_normal((3, 4))
        B = rng.standard_normal((5, 4))
        K = khatri_rao(A, B)
        assert K.shape == (15, 4)
        for j in range(4):
            assert np.allclose(K[:, j], np.kron(A[:, j], B[:, j]), rtol=0, atol=1e-15)

    def test_column_count_mismatch(self):
        """Test that factors need equal column counts."""
        with pytest.raises(ShapeError):
            khatri_rao(np.ones((2, 3)), np.ones((2, 2)))

    @pytest.mark.parametrize("seed", range(200))
    def test_cp_matricization_identities(self, seed):
        """Test X_(1) = A(C.B)^T, X_(2) = B(C.A)^T, X_(3) = C(B.A)^T."""
        rng = make_rng(seed)
        A = rng.standard_normal((4, 3))
        B = rng.standard_normal((5, 3))
        C = rng.standard_normal((6, 3))
        T = cp_reconstruct(A, B, C)
        assert _relative(A @ khatri_rao(C, B).T, unfold(T, 1)) <= 1e-12
        assert _relative(B @ khatri_rao(C, A).T, unfold(T, 2)) <= 1e-12
        assert _relative(C @ khatri_rao(B, A).T, unfold(T, 3)) <= 1e-12

    def test_hadamard_shape_check(self):
        """Test element-wise product shape validation."""
        assert np.array_equal(hadamard(np.full((2, 2), 2.0), np.full((2, 2), 3.0)), np.full((2, 2), 6.0))
        with pytest.raises(ShapeError):
            hadamard(np.ones((2, 2)), np.ones((2, 3)))


class TestSpectralHelpers:
    """Test spectrum, rank and angle helpers."""

    def test_numerical_rank_of_product(self, rng):
        """Test rank of a product of thin factors."""
        M = rng.random((30, 4)) @ rng.random((4, 20))
        assert numerical_rank(M) == 4
        assert numerical_rank(np.zeros((3, 3))) == 0

    def test_spectrum_is_descending(self, rng):
        """Test singular values come sorted."""
        s = spectrum(rng.standard_normal((8, 5)))
        assert s.shape == (5,)
        assert np.all(np.diff(s) <= 0)

    def test_principal_angles_same_subspace(self, rng):
        """Test angles vanish for two bases of one subspace."""
        A = rng.standard_normal((10, 3))
        B = A @ rng.standard_normal((3, 3))
        assert np.max(principal_angles(A, B)) < 1e-7


class TestNorms:
    """Test matrix and tensor norms."""

    def test_frobenius_of_small_matrices(self):
        """Test the Frobenius norm of I_3 and of [3 4]."""
        assert frobenius_norm(np.eye(3)) == pytest.approx(np.sqrt(3.0))
        assert frobenius_norm([[3.0, 4.0]]) == pytest.approx(5.0)

    def test_unfolding_preserves_norm(self, rng):
        """Test ||X_(1)||_F equals the tensor norm."""
        T = rng.standard_normal((4, 5, 3))
        assert frobenius_norm(unfold1(T)) == pytest.approx(tensor_norm(T), rel=1e-14)

    def test_rejects_tensor(self):
        """Test a 3-way array is not a matrix."""
        with pytest.raises(ShapeError):
            frobenius_norm(np.ones((2, 2, 2)))
