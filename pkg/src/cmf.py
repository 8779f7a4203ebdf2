"""Coupled matrix factorization X ~ U V^T, Y ~ U W^T.

The optimal coupled rank-k factors come from the truncated SVD of the
augmented matrix [X Y]: U holds the leading k left singular vectors and
Z = [V; W] = V_k Sigma_k. The randomized variants solve the same problem on
Q^T X, Q^T Y for a joint orthonormal basis Q and lift U = Q U_hat.
"""

import logging
import time
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as la

from .errors import ParameterError, ShapeError
from .models import SketchPlan
from .sketching import coupled_basis
from .tensor_core import as_matrix, frobenius_norm, tensor_norm

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CmfResult:
    """Factors of a coupled rank-k approximation plus timings."""
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    achieved_p: int = 0
    elapsed_total_s: float = 0.0
    elapsed_core_s: float = 0.0
    # Columns of the joint basis; None for the direct solver
    basis_cols: Optional[int] = None

    @property
    def k(self) -> int:
        return self.U.shape[1]

    @property
    def Z(self) -> np.ndarray:
        """Stacked right factor [V; W]."""
        return np.vstack([self.V, self.W])


def check_cmf_inputs(X: np.ndarray, Y: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Validate the pair and the rank: k < min(n1, n2) and k <= m."""
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ShapeError(f"X and Y must share the row count, got {X.shape[0]} and {Y.shape[0]}")
    m, n1, n2 = X.shape[0], X.shape[1], Y.shape[1]
    if not 1 <= k < min(n1, n2):
        raise ParameterError(f"rank k={k} must satisfy 1 <= k < min(n1, n2) = {min(n1, n2)}")
    if k > m:
        raise ParameterError(f"rank k={k} exceeds the row count m={m}")
    return X, Y


def _coupled_svd(X: np.ndarray, Y: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Truncated SVD of [X Y]; zero-pads when fewer than k components exist."""
    n1 = X.shape[1]
    U_full, s, Vt = la.svd(np.hstack([X, Y]), full_matrices=False)
    avail = min(k, s.size)
    U = np.zeros((X.shape[0], k))
    Z = np.zeros((n1 + Y.shape[1], k))
    U[:, :avail] = U_full[:, :avail]
    Z[:, :avail] = Vt[:avail].T * s[:avail]
    return U, Z[:n1], Z[n1:]


def cmf_basic(X: np.ndarray, Y: np.ndarray, k: int) -> CmfResult:
    """Optimal coupled rank-k factorization via the SVD of [X Y]."""
    X, Y = check_cmf_inputs(X, Y, k)
    start = time.perf_counter()
    U, V, W = _coupled_svd(X, Y, k)
    elapsed = time.perf_counter() - start
    return CmfResult(U=U, V=V, W=W, achieved_p=0,
                     elapsed_total_s=elapsed, elapsed_core_s=elapsed)


def _projected_cmf(X: np.ndarray, Y: np.ndarray, k: int, plan: SketchPlan) -> CmfResult:
    X, Y = check_cmf_inputs(X, Y, k)
    start = time.perf_counter()
    Q = coupled_basis(X, Y, k, plan).Q
    core_start = time.perf_counter()
    U_hat, V, W = _coupled_svd(Q.T @ X, Q.T @ Y, k)
    core_end = time.perf_counter()
    U = Q @ U_hat
    total = time.perf_counter() - start
    achieved_p = max(Q.shape[1] - k, 0)
    logger.debug(f"{plan.label()} CMF: k={k}, p={achieved_p}, total={total:.4f}s")
    return CmfResult(U=U, V=V, W=W, achieved_p=achieved_p,
                     elapsed_total_s=total, elapsed_core_s=core_end - core_start,
                     basis_cols=Q.shape[1])


def _require(plan: SketchPlan, strategy: str) -> None:
    if plan.strategy != strategy:
        raise ParameterError(f"expected a {strategy!r} plan, got {plan.strategy!r}")


def cmf_randomized(X: np.ndarray, Y: np.ndarray, k: int, plan: SketchPlan) -> CmfResult:
    """CMF projected on the joint basis of two single-pass Gaussian sketches."""
    _require(plan, "simple")
    return _projected_cmf(X, Y, k, plan)


def cmf_rsi(X: np.ndarray, Y: np.ndarray, k: int, plan: SketchPlan) -> CmfResult:
    """CMF projected on randomized-subspace-iteration bases of depth q."""
    _require(plan, "rsi")
    return _projected_cmf(X, Y, k, plan)


def cmf_rbki(X: np.ndarray, Y: np.ndarray, k: int, plan: SketchPlan) -> CmfResult:
    """CMF projected on block Krylov bases (block size ell, depth q)."""
    _require(plan, "rbki")
    if plan.ell * plan.q < k:
        raise ParameterError(
            f"block Krylov basis of ell*q={plan.ell * plan.q} columns cannot hold rank k={k}"
        )
    return _projected_cmf(X, Y, k, plan)


def cmf(X: np.ndarray, Y: np.ndarray, k: int, plan: Optional[SketchPlan] = None) -> CmfResult:
    """Run the CMF variant the plan selects (basic when no plan is given)."""
    if plan is None or plan.strategy == "none":
        return cmf_basic(X, Y, k)
    solver = {"simple": cmf_randomized, "rsi": cmf_rsi, "rbki": cmf_rbki}[plan.strategy]
    return solver(X, Y, k, plan)


def _check_factors(X: np.ndarray, Y: np.ndarray, result: CmfResult) -> Tuple[np.ndarray, np.ndarray]:
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    m, k = result.U.shape
    if X.shape != (m, result.V.shape[0]) or Y.shape != (m, result.W.shape[0]):
        raise ShapeError(
            f"factors U{result.U.shape}, V{result.V.shape}, W{result.W.shape} "
            f"do not match X{X.shape}, Y{Y.shape}"
        )
    if result.V.shape[1] != k or result.W.shape[1] != k:
        raise ShapeError("factor column counts differ")
    return X, Y


def cmf_objective(X: np.ndarray, Y: np.ndarray, result: CmfResult) -> float:
    """||X - U V^T||_F^2 + ||Y - U W^T||_F^2."""
    X, Y = _check_factors(X, Y, result)
    return (frobenius_norm(X - result.U @ result.V.T) ** 2
            + frobenius_norm(Y - result.U @ result.W.T) ** 2)


def relative_error(reference: np.ndarray, approx: np.ndarray) -> float:
    """||reference - approx|| / ||reference||, Frobenius norm over all entries."""
    norm = tensor_norm if np.ndim(reference) == 3 else frobenius_norm
    ref_norm = norm(reference)
    residual = norm(np.asarray(reference) - approx)
    if ref_norm == 0.0:
        return 0.0 if residual == 0.0 else float("inf")
    return residual / ref_norm


def relative_errors(X: np.ndarray, Y: np.ndarray, result: CmfResult) -> Tuple[float, float]:
    """(err_X, err_Y) relative Frobenius errors."""
    X, Y = _check_factors(X, Y, result)
    return (relative_error(X, result.U @ result.V.T),
            relative_error(Y, result.U @ result.W.T))
