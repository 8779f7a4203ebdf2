"""Tests for coupled matrix factorization."""

import math

import numpy as np
import pytest

from src.cmf import (
    CmfResult,
    cmf,
    cmf_basic,
    cmf_objective,
    cmf_randomized,
    cmf_rbki,
    cmf_rsi,
    relative_error,
    relative_errors,
)
from src.errors import ParameterError, ShapeError
from src.models import SketchPlan
from src.sketching import coupled_basis, make_rng
from src.testgen import synthetic2

from conftest import orthonormality_defect

PLANS = [
    SketchPlan(strategy="simple", seed=3),
    SketchPlan(strategy="rsi", q=2, seed=3),
    SketchPlan(strategy="rbki", ell=3, q=4, seed=3),
]


def _tail_energy(X: np.ndarray, Y: np.ndarray, k: int) -> float:
    s = np.linalg.svd(np.hstack([X, Y]), compute_uv=False)
    return float(np.sum(s[k:] ** 2))


class TestBasicCmf:
    """Test the SVD-based optimal factorization."""

    @pytest.mark.parametrize("seed", range(200))
    def test_objective_equals_tail_energy(self, seed):
        """Test the objective is the rank-k tail energy of [X Y]."""
        rng = make_rng(seed)
        X = rng.standard_normal((40, 15))
        Y = rng.standard_normal((40, 25))
        expected = _tail_energy(X, Y, 5)
        assert abs(cmf_objective(X, Y, cmf_basic(X, Y, 5)) - expected) <= 1e-10 * expected

    def test_factor_shapes_and_orthonormal_u(self, random_pair):
        """Test U is m x k orthonormal, V is n1 x k and W is n2 x k."""
        X, Y = random_pair
        result = cmf_basic(X, Y, 5)
        assert result.U.shape == (40, 5)
        assert result.V.shape == (15, 5)
        assert result.W.shape == (25, 5)
        assert result.Z.shape == (40, 5)
        assert result.k == 5
        assert result.achieved_p == 0
        assert orthonormality_defect(result.U) <= 1e-10

    def test_exact_rank_recovered(self, planted_pair):
        """Test planted coupled rank-k pairs are reproduced."""
        X, Y = planted_pair(50, 20, 30, 4, 1)
        err_x, err_y = relative_errors(X, Y, cmf_basic(X, Y, 4))
        assert err_x <= 1e-10 and err_y <= 1e-10

    def test_rank_deficient_pair(self):
        """Test a rank-one pair is reproduced at k = 2."""
        X = np.ones((2, 5))
        Y = np.ones((2, 6))
        result = cmf_basic(X, Y, 2)
        assert result.U.shape == (2, 2)
        assert relative_errors(X, Y, result) == pytest.approx((0.0, 0.0), abs=1e-12)


class TestInputValidation:
    """Test rank and shape checks."""

    @pytest.mark.parametrize("k", [0, 15, 16])
    def test_rank_bounds(self, k, random_pair):
        """Test 1 <= k < min(n1, n2) is required."""
        X, Y = random_pair
        with pytest.raises(ParameterError):
            cmf_basic(X, Y, k)

    def test_rank_above_row_count(self):
        """Test k may not exceed m."""
        X = np.ones((3, 10))
        with pytest.raises(ParameterError):
            cmf_basic(X, X, 4)

    def test_row_mismatch(self):
        """Test X and Y need the same row count."""
        with pytest.raises(ShapeError):
            cmf_basic(np.ones((4, 5)), np.ones((5, 5)), 2)

    def test_wrong_plan_for_variant(self, random_pair):
        """Test each randomized entry point checks its strategy."""
        X, Y = random_pair
        with pytest.raises(ParameterError):
            cmf_rsi(X, Y, 3, SketchPlan(strategy="simple"))
        with pytest.raises(ParameterError):
            cmf_randomized(X, Y, 3, SketchPlan(strategy="rsi", q=2))

    def test_rbki_needs_enough_columns(self, random_pair):
        """Test ell*q >= k for block Krylov."""
        X, Y = random_pair
        with pytest.raises(ParameterError):
            cmf_rbki(X, Y, 5, SketchPlan(strategy="rbki", ell=2, q=2))


class TestRandomizedCmf:
    """Test the projected variants."""

    @pytest.mark.parametrize("k", [1, 5, 10])
    def test_exact_recovery(self, k, planted_pair):
        """Test every plan recovers a planted coupled rank-k pair."""
        X, Y = planted_pair(200, 40, 60, k, k)
        plans = [None,
                 SketchPlan(strategy="simple", seed=k),
                 SketchPlan(strategy="rsi", q=2, seed=k),
                 SketchPlan(strategy="rbki", ell=2, q=math.ceil(k / 2) + 2, seed=k)]
        for plan in plans:
            err_x, err_y = relative_errors(X, Y, cmf(X, Y, k, plan))
            assert err_x <= 1e-9 and err_y <= 1e-9

    @pytest.mark.parametrize("seed", range(200))
    def test_basic_dominates(self, seed):
        """Test no randomized objective beats the SVD objective."""
        rng = make_rng(seed)
        X = rng.standard_normal((30, 12))
        Y = rng.standard_normal((30, 14))
        best = cmf_objective(X, Y, cmf_basic(X, Y, 4))
        plan = PLANS[seed % 3].model_copy(update={"seed": seed})
        assert best <= cmf_objective(X, Y, cmf(X, Y, 4, plan)) + 1e-10

    @pytest.mark.parametrize("plan", PLANS, ids=lambda p: p.strategy)
    def test_lift_preserves_gram(self, plan, random_pair):
        """Test U^T U of the lifted factor equals the projected one."""
        X, Y = random_pair
        result = cmf(X, Y, 5, plan)
        Q = coupled_basis(X, Y, 5, plan).Q
        U_hat = Q.T @ result.U
        assert np.linalg.norm(result.U.T @ result.U - U_hat.T @ U_hat) <= 1e-10

    @pytest.mark.parametrize("plan", PLANS, ids=lambda p: p.strategy)
    def test_deterministic_per_seed(self, plan, random_pair):
        """Test identical inputs and plan give identical numerics."""
        X, Y = random_pair
        a, b = cmf(X, Y, 5, plan), cmf(X, Y, 5, plan)
        assert np.array_equal(a.U, b.U)
        assert np.array_equal(a.V, b.V)
        assert np.array_equal(a.W, b.W)

    def test_achieved_oversampling(self, random_pair, planted_pair):
        """Test p counts the joint-basis columns beyond k."""
        X, Y = random_pair
        assert cmf(X, Y, 5, SketchPlan(strategy="simple")).achieved_p == 5
        Xp, Yp = planted_pair(40, 15, 20, 3, 2)
        assert cmf(Xp, Yp, 3, SketchPlan(strategy="simple")).achieved_p == 0

    def test_core_time_within_total(self, random_pair):
        """Test the solve-only timing never exceeds sketch plus solve."""
        X, Y = random_pair
        result = cmf(X, Y, 5, SketchPlan(strategy="rsi", q=2))
        assert 0.0 <= result.elapsed_core_s <= result.elapsed_total_s

    def test_basic_alias(self, random_pair):
        """Test "basic" selects the direct solver."""
        X, Y = random_pair
        direct = cmf_basic(X, Y, 5)
        aliased = cmf(X, Y, 5, SketchPlan(strategy="basic"))
        assert np.array_equal(direct.U, aliased.U)

    def test_rsi_single_round_matches_simple(self, random_pair):
        """Test RSI with q=1 reproduces the plain sketch bit for bit."""
        X, Y = random_pair
        rsi = cmf_rsi(X, Y, 5, SketchPlan(strategy="rsi", q=1, seed=4))
        simple = cmf_randomized(X, Y, 5, SketchPlan(strategy="simple", seed=4))
        assert np.array_equal(rsi.U, simple.U)

    @pytest.mark.parametrize("seed", range(5))
    def test_rsi_depth_improves_objective(self, seed):
        """Test five subspace iterations do no worse than two."""
        X, Y = synthetic2(80, 5, 2, 10, seed)
        shallow = cmf_objective(X, Y, cmf_rsi(X, Y, 10, SketchPlan(strategy="rsi", q=2, seed=seed)))
        deep = cmf_objective(X, Y, cmf_rsi(X, Y, 10, SketchPlan(strategy="rsi", q=5, seed=seed)))
        assert deep <= shallow * (1 + 1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_rbki_depth_never_hurts(self, seed, random_pair):
        """Test deeper Krylov spaces from one seed never raise the objective."""
        X, Y = random_pair
        objectives = [cmf_objective(X, Y, cmf_rbki(X, Y, 5, SketchPlan(strategy="rbki", ell=2, q=q,
                                                                       seed=seed)))
                      for q in range(3, 8)]
        for before, after in zip(objectives, objectives[1:]):
            assert after <= before + 1e-10 * max(1.0, before)


class TestErrors:
    """Test objective and relative-error metrics."""

    def test_zero_reference(self):
        """Test an all-zero reference yields 0 or +inf."""
        zero = np.zeros((2, 2))
        assert relative_error(zero, zero) == 0.0
        assert relative_error(zero, np.ones((2, 2))) == math.inf

    def test_objective_matches_errors(self, random_pair):
        """Test objective == err_X^2 ||X||^2 + err_Y^2 ||Y||^2."""
        X, Y = random_pair
        result = cmf_basic(X, Y, 5)
        ex, ey = relative_errors(X, Y, result)
        expected = ex ** 2 * np.sum(X * X) + ey ** 2 * np.sum(Y * Y)
        assert cmf_objective(X, Y, result) == pytest.approx(expected, rel=1e-12)

    def test_factor_mismatch(self, random_pair):
        """Test factors must conform with X and Y."""
        X, Y = random_pair
        bad = CmfResult(U=np.ones((40, 2)), V=np.ones((10, 2)), W=np.ones((25, 2)))
        with pytest.raises(ShapeError):
            cmf_objective(X, Y, bad)
