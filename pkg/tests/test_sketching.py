"""Tests for sketches and orthonormal basis builders."""

import numpy as np
import pytest

from src.errors import ParameterError, ShapeError
from src.models import SketchPlan
from src.sketching import (
    coupled_basis,
    gaussian,
    joint_basis,
    make_rng,
    rbki_basis,
    rsi_basis,
    simple_basis,
    sketch_basis,
    thin_qr,
)
from src.testgen import synthetic2, synthetic5

from conftest import orthonormality_defect


def _capture_residual(Q: np.ndarray, X: np.ndarray) -> float:
    return float(np.linalg.norm(X - Q @ (Q.T @ X)) / np.linalg.norm(X))


class TestRandomStreams:
    """Test seeded Gaussian draws."""

    def test_same_seed_same_stream(self):
        """Test Philox streams are reproducible."""
        assert np.array_equal(gaussian(5, 3, make_rng(7)), gaussian(5, 3, make_rng(7)))
        assert not np.array_equal(gaussian(5, 3, make_rng(7)), gaussian(5, 3, make_rng(8)))

    def test_rejects_empty_sketch(self, rng):
        """Test sketch dims must be positive."""
        with pytest.raises(ParameterError):
            gaussian(0, 3, rng)

    def test_standard_normal_moments(self):
        """Test draws have mean 0 and variance 1."""
        G = gaussian(1000, 200, make_rng(0))
        assert abs(G.mean()) <= 0.01
        assert abs(G.var() - 1.0) <= 0.02


class TestThinQr:
    """Test the economic QR wrapper."""

    def test_orthonormal_factor(self, rng):
        """Test Q has orthonormal columns and QR == A."""
        A = rng.standard_normal((20, 6))
        Q, R = thin_qr(A)
        assert Q.shape == (20, 6) and R.shape == (6, 6)
        assert orthonormality_defect(Q) <= 1e-12
        assert np.allclose(Q @ R, A)

    def test_wide_matrix_rejected(self, rng):
        """Test rows >= cols is required."""
        with pytest.raises(ShapeError):
            thin_qr(rng.standard_normal((3, 5)))


class TestJointBasis:
    """Test the rank-revealing union of two bases."""

    def test_disjoint_ranges_keep_all_columns(self, rng):
        """Test two generic 3-dim subspaces of R^30 give a 6-column basis."""
        Q1 = thin_qr(rng.standard_normal((30, 3)))[0]
        Q2 = thin_qr(rng.standard_normal((30, 3)))[0]
        basis = joint_basis(Q1, Q2, 1e-10)
        assert basis.effective_cols == 6
        assert orthonormality_defect(basis.Q) <= 1e-10

    def test_identical_ranges_collapse(self, rng):
        """Test overlapping ranges are not double-counted."""
        Q1 = thin_qr(rng.standard_normal((30, 4)))[0]
        Q2 = thin_qr(Q1 @ rng.standard_normal((4, 4)))[0]
        basis = joint_basis(Q1, Q2, 1e-10)
        assert basis.effective_cols == 4
        assert _capture_residual(basis.Q, Q2) <= 1e-10

    def test_partial_overlap(self, rng):
        """Test a shared 2-dim subspace is counted once."""
        shared = rng.standard_normal((40, 2))
        Q1 = thin_qr(np.hstack([shared, rng.standard_normal((40, 3))]))[0]
        Q2 = thin_qr(np.hstack([shared, rng.standard_normal((40, 3))]))[0]
        assert joint_basis(Q1, Q2, 1e-10).effective_cols == 8

    @pytest.mark.parametrize("seed", range(200))
    def test_symmetric_up_to_span(self, seed):
        """Test joint_basis(Q1, Q2) and joint_basis(Q2, Q1) project alike."""
        rng = make_rng(seed)
        Q1 = thin_qr(rng.standard_normal((25, 4)))[0]
        Q2 = thin_qr(rng.standard_normal((25, 5)))[0]
        A = joint_basis(Q1, Q2, 1e-10).Q
        B = joint_basis(Q2, Q1, 1e-10).Q
        assert orthonormality_defect(A) <= 1e-10
        assert np.linalg.norm(A @ A.T - B @ B.T) <= 1e-8

    def test_row_mismatch(self, rng):
        """Test both bases must live in the same space."""
        with pytest.raises(ShapeError):
            joint_basis(np.eye(4)[:, :2], np.eye(5)[:, :2], 1e-10)

    def test_tolerance_range(self):
        """Test trunc_tol must lie in (0, 1)."""
        with pytest.raises(ParameterError):
            joint_basis(np.eye(4)[:, :2], np.eye(4)[:, 2:], 1.5)


class TestBasisBuilders:
    """Test the simple, RSI and block Krylov builders."""

    @pytest.mark.parametrize("seed", range(200))
    def test_capture_at_exact_rank(self, seed, planted_pair):
        """Test every builder captures range(X) when rank(X) <= k."""
        X, _ = planted_pair(30, 12, 14, 3, seed)
        rng = make_rng(seed)
        for Q in (simple_basis(X, 3, rng), rsi_basis(X, 3, 2, rng), rbki_basis(X, 2, 2, rng)):
            assert _capture_residual(Q, X) <= 1e-9

    def test_rsi_single_round_is_simple_sketch(self, rng):
        """Test RSI with q=1 reproduces the simple sketch for one seed."""
        X = rng.standard_normal((30, 20))
        assert np.array_equal(rsi_basis(X, 5, 1, make_rng(3)), simple_basis(X, 5, make_rng(3)))

    def test_rsi_is_orthonormal(self, rng):
        """Test the final RSI basis."""
        Q = rsi_basis(rng.standard_normal((50, 30)), 8, 4, make_rng(0))
        assert Q.shape == (50, 8)
        assert orthonormality_defect(Q) <= 1e-10

    def test_rbki_shape_and_orthonormality(self, rng):
        """Test block Krylov returns ell*q orthonormal columns."""
        Q = rbki_basis(rng.standard_normal((60, 40)), 2, 5, make_rng(1))
        assert Q.shape == (60, 10)
        assert orthonormality_defect(Q) <= 1e-10

    @pytest.mark.parametrize("seed", range(5))
    def test_rsi_error_shrinks_with_depth(self, seed):
        """Test more subspace iterations never capture less of X."""
        X, _ = synthetic2(80, 5, 2, 10, seed)
        residuals = [_capture_residual(rsi_basis(X, 10, q, make_rng(seed)), X) for q in range(1, 6)]
        for before, after in zip(residuals, residuals[1:]):
            assert after <= before * 1.01

    @pytest.mark.parametrize("seed", range(5))
    def test_rbki_spans_krylov_space(self, seed, rng):
        """Test the basis spans A Omega, (A A^T) A Omega, ... for the same draw."""
        A = rng.standard_normal((60, 40))
        ell, q = 2, 4
        Q = rbki_basis(A, ell, q, make_rng(seed))
        block = A @ gaussian(A.shape[1], ell, make_rng(seed))
        for _ in range(q):
            block = block / np.linalg.norm(block, axis=0)
            assert _capture_residual(Q, block) <= 1e-10
            block = A @ (A.T @ block)

    def test_rbki_orthonormal_on_geometric_spectrum(self):
        """Test the basis stays orthonormal once the Krylov space is exhausted."""
        X, _ = synthetic5(500, 300, 200, 10, seed=0)
        Q = rbki_basis(X, 2, 16, make_rng(0))
        assert Q.shape == (500, 32)
        assert orthonormality_defect(Q) <= 1e-10

    def test_rbki_too_many_columns(self, rng):
        """Test ell*q may not exceed the row count."""
        with pytest.raises(ParameterError):
            rbki_basis(rng.standard_normal((10, 8)), 3, 4, make_rng(1))

    def test_simple_basis_truncation(self, planted_pair):
        """Test trunc_tol drops directions beyond the numerical rank."""
        X, _ = planted_pair(30, 15, 15, 3, 4)
        Q = simple_basis(X, 6, make_rng(0), trunc_tol=1e-10)
        assert Q.shape[1] == 3

    def test_rank_out_of_range(self, rng):
        """Test k must lie in [1, min(X.shape)]."""
        with pytest.raises(ParameterError):
            simple_basis(rng.standard_normal((5, 4)), 5, rng)
        with pytest.raises(ParameterError):
            rsi_basis(rng.standard_normal((5, 4)), 2, 0, rng)

    def test_sketch_basis_dispatch(self, rng):
        """Test the plan's strategy selects the builder."""
        X = rng.standard_normal((20, 10))
        plan = SketchPlan(strategy="rbki", ell=2, q=3)
        assert sketch_basis(X, 4, plan, make_rng(0)).shape == (20, 6)
        assert sketch_basis(X, 4, SketchPlan(strategy="rsi", q=2), make_rng(0)).shape == (20, 4)
        with pytest.raises(ParameterError):
            sketch_basis(X, 4, SketchPlan(strategy="none"), make_rng(0))


class TestCoupledBasis:
    """Test the joint basis of a coupled pair."""

    @pytest.mark.parametrize("strategy,extra", [
        ("simple", {}), ("rsi", {"q": 3}), ("rbki", {"ell": 2, "q": 3}),
    ])
    def test_deterministic_per_plan(self, strategy, extra, random_pair):
        """Test identical plans give bitwise-identical bases."""
        X, Y = random_pair
        plan = SketchPlan(strategy=strategy, seed=11, **extra)
        assert np.array_equal(coupled_basis(X, Y, 5, plan).Q, coupled_basis(X, Y, 5, plan).Q)

    def test_seed_changes_basis(self, random_pair):
        """Test different seeds draw different sketches."""
        X, Y = random_pair
        a = coupled_basis(X, Y, 5, SketchPlan(strategy="simple", seed=1)).Q
        b = coupled_basis(X, Y, 5, SketchPlan(strategy="simple", seed=2)).Q
        assert not np.array_equal(a, b)

    def test_shared_range_collapses_oversampling(self, planted_pair):
        """Test X and Y with one common column space give k columns."""
        X, Y = planted_pair(50, 20, 30, 4, 8)
        basis = coupled_basis(X, Y, 4, SketchPlan(strategy="simple", seed=0))
        assert basis.effective_cols == 4
        assert _capture_residual(basis.Q, np.hstack([X, Y])) <= 1e-9

    def test_independent_ranges_double(self, random_pair):
        """Test generic X and Y give 2k joint columns."""
        X, Y = random_pair
        assert coupled_basis(X, Y, 5, SketchPlan(strategy="simple")).effective_cols == 10
