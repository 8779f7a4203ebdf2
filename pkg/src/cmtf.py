"""Coupled matrix-tensor factorization, coupled in the first mode.

Tucker form reduces to CMF of the mode-1 unfolding and the matrix, so its
objective is the global minimum over all coupled rank-k models. CP form is
fitted by alternating least squares over U, B, C, W (in that order), which
only guarantees a non-increasing objective.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
import scipy.linalg as la

from .cmf import CmfResult, cmf, cmf_objective, relative_error
from .config import settings
from .errors import CollapsedBasisError, DegenerateIterateError, ParameterError, ShapeError
from .models import SketchPlan
from .sketching import coupled_basis, gaussian, make_rng
from .tensor_core import (
    as_matrix,
    as_tensor3,
    cp_reconstruct,
    fold1,
    khatri_rao,
    mode_product,
    unfold,
    unfold1,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TuckerCmtfResult:
    """Tucker-form coupled factors; only the product U V^T is materialized."""
    X_approx: np.ndarray
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    achieved_p: int = 0
    elapsed_total_s: float = 0.0
    elapsed_core_s: float = 0.0
    basis_cols: Optional[int] = None

    def as_cmf(self) -> CmfResult:
        return CmfResult(U=self.U, V=self.V, W=self.W, achieved_p=self.achieved_p,
                         elapsed_total_s=self.elapsed_total_s,
                         elapsed_core_s=self.elapsed_core_s,
                         basis_cols=self.basis_cols)


@dataclass(frozen=True)
class CpCmtfResult:
    """CP-form coupled factors from ALS."""
    U: np.ndarray
    B: np.ndarray
    C: np.ndarray
    W: np.ndarray
    iterations: int
    objective_trace: List[float] = field(default_factory=list)
    achieved_p: int = 0
    projection_energy: float = 0.0
    elapsed_total_s: float = 0.0
    elapsed_core_s: float = 0.0

    @property
    def objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else float("nan")


def check_cmtf_inputs(T: np.ndarray, Y: np.ndarray, k: int,
                      form: str = "cp") -> Tuple[np.ndarray, np.ndarray]:
    """Validate the pair and the rank.

    CP form needs k < min(n2, n3, n). Tucker form only factors the mode-1
    unfolding, so it needs k < min(n2 * n3, n).
    """
    T = as_tensor3(T, "T")
    Y = as_matrix(Y, "Y")
    if T.shape[0] != Y.shape[0]:
        raise ShapeError(f"T and Y must share mode-1 size, got {T.shape[0]} and {Y.shape[0]}")
    if form == "tucker":
        bound, text = min(T.shape[1] * T.shape[2], Y.shape[1]), "min(n2 * n3, n)"
    else:
        bound, text = min(T.shape[1], T.shape[2], Y.shape[1]), "min(n2, n3, n)"
    if not 1 <= k < bound:
        raise ParameterError(f"rank k={k} must satisfy 1 <= k < {text} = {bound}")
    if k > T.shape[0]:
        raise ParameterError(f"rank k={k} exceeds the mode-1 size m={T.shape[0]}")
    return T, Y


def cmtf_tucker(T: np.ndarray, Y: np.ndarray, k: int,
                plan: Optional[SketchPlan] = None) -> TuckerCmtfResult:
    """CMF of (X_(1), Y) by the plan's variant, with U V^T folded back."""
    T, Y = check_cmtf_inputs(T, Y, k, form="tucker")
    result = cmf(unfold1(T), Y, k, plan)
    X_approx = fold1(result.U @ result.V.T, T.shape)
    return TuckerCmtfResult(
        X_approx=X_approx, U=result.U, V=result.V, W=result.W,
        achieved_p=result.achieved_p,
        elapsed_total_s=result.elapsed_total_s,
        elapsed_core_s=result.elapsed_core_s,
        basis_cols=result.basis_cols,
    )


def tucker_objective(T: np.ndarray, Y: np.ndarray, result: TuckerCmtfResult) -> float:
    """||X_(1) - U V^T||_F^2 + ||Y - U W^T||_F^2."""
    return cmf_objective(unfold1(as_tensor3(T, "T")), Y, result.as_cmf())


def cp_objective(T: np.ndarray, Y: np.ndarray, result: CpCmtfResult) -> float:
    """||T - [[U, B, C]]||^2 + ||Y - U W^T||_F^2."""
    return _cp_objective(as_tensor3(T, "T"), as_matrix(Y, "Y"),
                         result.U, result.B, result.C, result.W)


def _cp_objective(T, Y, U, B, C, W) -> float:
    rx = T - cp_reconstruct(U, B, C)
    ry = Y - U @ W.T
    return float(np.sum(rx * rx) + np.sum(ry * ry))


def _gram_solve(G: np.ndarray, rhs: np.ndarray, iteration: int, factor: str) -> np.ndarray:
    """Solve F G = rhs for F with symmetric positive semidefinite G.

    Falls back to the pseudo-inverse above the configured condition limit;
    a Gram matrix with no positive eigenvalue is a degenerate iterate.
    """
    if not np.all(np.isfinite(G)) or not np.all(np.isfinite(rhs)):
        raise DegenerateIterateError(iteration, factor, "non-finite Gram system")
    eig = np.linalg.eigvalsh(G)
    top = eig[-1]
    if top <= 0.0:
        raise DegenerateIterateError(iteration, factor, "Gram matrix has no positive eigenvalue")
    if eig[0] <= top / settings.gram_cond_limit:
        logger.warning(
            f"ALS iteration {iteration}: {factor} Gram matrix ill-conditioned, using pseudo-inverse"
        )
        solution = rhs @ np.linalg.pinv(G, hermitian=True)
    else:
        solution = la.cho_solve(la.cho_factor(G), rhs.T).T
    if not np.all(np.isfinite(solution)):
        raise DegenerateIterateError(iteration, factor, "update is not finite")
    return solution


def _hosvd_init(T: np.ndarray, Y: np.ndarray, k: int):
    U = la.svd(np.hstack([unfold(T, 1), Y]), full_matrices=False)[0][:, :k]
    B = la.svd(unfold(T, 2), full_matrices=False)[0][:, :k]
    C = la.svd(unfold(T, 3), full_matrices=False)[0][:, :k]
    W = Y.T @ U
    return U, B, C, W


def cmtf_cp_als(
    T: np.ndarray,
    Y: np.ndarray,
    k: int,
    init_seed: int = 0,
    max_iters: Optional[int] = None,
    rel_tol: Optional[float] = None,
    init: Literal["random", "hosvd"] = "random"
) -> CpCmtfResult:
    """CMTF in CP form by alternating least squares.

    Args:
        T: m x n2 x n3 tensor
        Y: m x n matrix coupled with T in mode 1
        k: number of CP components
        init_seed: seed of the standard normal initial factors
        max_iters: iteration cap (settings.als_max_iters by default)
        rel_tol: stop once |f_t - f_{t-1}| <= rel_tol * f_{t-1}
            (settings.als_rel_tol by default)
        init: "random" (default) or "hosvd" leading singular vectors

    Returns:
        CpCmtfResult with the per-iteration objective trace

    Raises:
        DegenerateIterateError: a Gram system has no positive eigenvalue
    """
    T, Y = check_cmtf_inputs(T, Y, k)
    max_iters = settings.als_max_iters if max_iters is None else max_iters
    rel_tol = settings.als_rel_tol if rel_tol is None else rel_tol
    if max_iters < 1:
        raise ParameterError(f"max_iters must be >= 1, got {max_iters}")

    m, n2, n3 = T.shape
    if init == "hosvd":
        U, B, C, W = _hosvd_init(T, Y, k)
    else:
        rng = make_rng(init_seed)
        U = gaussian(m, k, rng)
        B = gaussian(n2, k, rng)
        C = gaussian(n3, k, rng)
        W = gaussian(Y.shape[1], k, rng)

    X1, X2, X3 = unfold(T, 1), unfold(T, 2), unfold(T, 3)
    # Objective values below this are at rounding level
    floor = (100 * np.finfo(np.float64).eps) ** 2 * (np.sum(T * T) + np.sum(Y * Y))
    start = time.perf_counter()
    previous = _cp_objective(T, Y, U, B, C, W)
    trace: List[float] = []

    for iteration in range(1, max_iters + 1):
        gamma1 = (B.T @ B) * (C.T @ C)
        U = _gram_solve(gamma1 + W.T @ W, X1 @ khatri_rao(C, B) + Y @ W, iteration, "U")
        gamma2 = (C.T @ C) * (U.T @ U)
        B = _gram_solve(gamma2, X2 @ khatri_rao(C, U), iteration, "B")
        gamma3 = (B.T @ B) * (U.T @ U)
        C = _gram_solve(gamma3, X3 @ khatri_rao(B, U), iteration, "C")
        W = _gram_solve(U.T @ U, Y.T @ U, iteration, "W")

        current = _cp_objective(T, Y, U, B, C, W)
        trace.append(current)
        logger.debug(f"ALS iteration {iteration}: objective {current:.6e}")
        if abs(previous - current) <= rel_tol * previous or current <= floor:
            break
        previous = current

    elapsed = time.perf_counter() - start
    logger.info(f"CP-ALS stopped after {len(trace)} iterations, objective {trace[-1]:.6e}")
    return CpCmtfResult(U=U, B=B, C=C, W=W, iterations=len(trace), objective_trace=trace,
                        elapsed_total_s=elapsed, elapsed_core_s=elapsed)


def cmtf_cp_als_randomized(
    T: np.ndarray,
    Y: np.ndarray,
    k: int,
    plan: SketchPlan,
    init_seed: int = 0,
    max_iters: Optional[int] = None,
    rel_tol: Optional[float] = None,
    init: Literal["random", "hosvd"] = "random"
) -> CpCmtfResult:
    """CP-ALS on (T x_1 Q^T, Q^T Y) for a joint sketch basis Q, then U = Q U_hat.

    The returned trace holds projected objectives; adding projection_energy
    gives the full objective.
    """
    if not plan.is_randomized:
        raise ParameterError("randomized CP-ALS needs a simple, rsi or rbki plan")
    T, Y = check_cmtf_inputs(T, Y, k)
    X1 = unfold1(T)
    if plan.strategy == "rbki" and plan.ell * plan.q < k:
        raise ParameterError(
            f"block Krylov basis of ell*q={plan.ell * plan.q} columns cannot hold rank k={k}"
        )

    start = time.perf_counter()
    Q = coupled_basis(X1, Y, k, plan).Q
    if Q.shape[1] < k:
        raise CollapsedBasisError(
            f"joint basis has {Q.shape[1]} columns, fewer than rank k={k}"
        )
    T_proj = mode_product(T, Q.T, 1)
    Y_proj = Q.T @ Y
    projected = cmtf_cp_als(T_proj, Y_proj, k, init_seed=init_seed,
                            max_iters=max_iters, rel_tol=rel_tol, init=init)
    U = Q @ projected.U
    outside = np.hstack([X1, Y])
    outside = outside - Q @ (Q.T @ outside)
    total = time.perf_counter() - start

    return CpCmtfResult(
        U=U, B=projected.B, C=projected.C, W=projected.W,
        iterations=projected.iterations,
        objective_trace=projected.objective_trace,
        achieved_p=max(Q.shape[1] - k, 0),
        projection_energy=float(np.sum(outside * outside)),
        elapsed_total_s=total,
        elapsed_core_s=projected.elapsed_core_s,
    )


def cmtf_errors(T: np.ndarray, Y: np.ndarray, result) -> Tuple[float, float]:
    """(err_X, err_Y): Tucker results against X_approx, CP against [[U, B, C]]."""
    T = as_tensor3(T, "T")
    Y = as_matrix(Y, "Y")
    if isinstance(result, TuckerCmtfResult):
        approx = result.X_approx
    elif isinstance(result, CpCmtfResult):
        approx = cp_reconstruct(result.U, result.B, result.C)
    else:
        raise TypeError(f"unsupported CMTF result type: {type(result).__name__}")
    if approx.shape != T.shape or result.U.shape[0] != Y.shape[0] or result.W.shape[0] != Y.shape[1]:
        raise ShapeError("CMTF factors do not match T and Y")
    return relative_error(T, approx), relative_error(Y, result.U @ result.W.T)
