"""Random sketches and orthonormal basis builders.

Every builder draws its Gaussian test matrices from an explicit
`numpy.random.Generator` so that a seeded plan reproduces bitwise-identical
bases. Generators use the counter-based Philox bit generator.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as la

from .errors import ParameterError, ShapeError
from .models import SketchPlan
from .tensor_core import as_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class JointBasis:
    """Orthonormal basis of a subspace of range(Q1) + range(Q2)."""
    Q: np.ndarray

    @property
    def effective_cols(self) -> int:
        return self.Q.shape[1]


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator over the counter-based Philox stream."""
    return np.random.Generator(np.random.Philox(seed))


def gaussian(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Matrix of i.i.d. standard normal entries."""
    if rows < 1 or cols < 1:
        raise ParameterError(f"Gaussian sketch needs positive dims, got {rows}x{cols}")
    return rng.standard_normal((rows, cols))


def thin_qr(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Economic QR; A must have at least as many rows as columns."""
    A = as_matrix(A, "A")
    if A.shape[0] < A.shape[1]:
        raise ShapeError(f"thin QR needs rows >= cols, got {A.shape}")
    Q, R = la.qr(A, mode="economic")
    return Q, R


def joint_basis(Q1: np.ndarray, Q2: np.ndarray, trunc_tol: float) -> JointBasis:
    """Reorthogonalize [Q1 Q2] with a rank-revealing (column-pivoted) QR.

    Columns whose pivoted diagonal satisfies |R_ii| < trunc_tol * |R_11| are
    dropped, so overlapping ranges collapse the oversampling.
    """
    Q1 = as_matrix(Q1, "Q1")
    Q2 = as_matrix(Q2, "Q2")
    if Q1.shape[0] != Q2.shape[0]:
        raise ShapeError(f"bases have different row counts: {Q1.shape[0]} vs {Q2.shape[0]}")
    if not 0.0 < trunc_tol < 1.0:
        raise ParameterError(f"trunc_tol must lie in (0, 1), got {trunc_tol}")

    Q, R, _ = la.qr(np.hstack([Q1, Q2]), mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    keep = max(1, int(np.sum(diag >= trunc_tol * diag[0])))
    logger.debug(
        f"Joint basis keeps {keep} of {Q1.shape[1] + Q2.shape[1]} columns"
    )
    return JointBasis(Q=Q[:, :keep])


def _check_rank(A: np.ndarray, k: int) -> None:
    if not 1 <= k <= min(A.shape):
        raise ParameterError(f"sketch rank k={k} outside [1, {min(A.shape)}] for {A.shape}")


def simple_basis(
    X: np.ndarray,
    k: int,
    rng: np.random.Generator,
    trunc_tol: Optional[float] = None
) -> np.ndarray:
    """Orthonormal basis of range(X @ Omega) for a fresh n x k Gaussian Omega.

    With `trunc_tol`, directions of X @ Omega below trunc_tol relative to the
    leading one are discarded (rank-deficient X).
    """
    X = as_matrix(X, "X")
    _check_rank(X, k)
    sketch = X @ gaussian(X.shape[1], k, rng)
    if trunc_tol is None:
        return thin_qr(sketch)[0]
    Q, R, _ = la.qr(sketch, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    keep = max(1, int(np.sum(diag >= trunc_tol * diag[0])))
    return Q[:, :keep]


def rsi_basis(X: np.ndarray, k: int, q: int, rng: np.random.Generator) -> np.ndarray:
    """Randomized subspace iteration: q rounds of Q = qr(X Omega), Omega = X^T Q."""
    X = as_matrix(X, "X")
    _check_rank(X, k)
    if q < 1:
        raise ParameterError(f"subspace iteration depth q must be >= 1, got {q}")
    omega = gaussian(X.shape[1], k, rng)
    for _ in range(q):
        Q = thin_qr(X @ omega)[0]
        omega = X.T @ Q
    return Q


def rbki_basis(A: np.ndarray, ell: int, q: int, rng: np.random.Generator) -> np.ndarray:
    """Randomized block Krylov iteration.

    Returns an orthonormal m x (ell*q) basis of the block Krylov space
    K_q(A A^T; A Omega_0). Each new block is Gram-Schmidt orthogonalized
    against all previous blocks twice, then orthonormalized by its own QR.
    """
    A = as_matrix(A, "A")
    if ell < 1 or q < 1:
        raise ParameterError(f"block Krylov needs ell >= 1 and q >= 1, got ell={ell}, q={q}")
    if ell * q > A.shape[0]:
        raise ParameterError(
            f"block Krylov basis of {ell * q} columns exceeds {A.shape[0]} rows"
        )

    omega = gaussian(A.shape[1], ell, rng)
    blocks = []
    for _ in range(q):
        block = A @ omega
        if blocks:
            previous = np.hstack(blocks)
            block = block - previous @ (previous.T @ block)
            # Reorthogonalization
            block = block - previous @ (previous.T @ block)
        block = thin_qr(block)[0]
        blocks.append(block)
        omega = A.T @ block
    return np.hstack(blocks)


def sketch_basis(A: np.ndarray, k: int, plan: SketchPlan, rng: np.random.Generator) -> np.ndarray:
    """Basis of (a subspace of) range(A) built by the plan's strategy."""
    if plan.strategy == "simple":
        return simple_basis(A, k, rng)
    if plan.strategy == "rsi":
        return rsi_basis(A, k, plan.q, rng)
    if plan.strategy == "rbki":
        return rbki_basis(A, plan.ell, plan.q, rng)
    raise ParameterError(f"strategy {plan.strategy!r} does not build a sketch basis")


def coupled_basis(X: np.ndarray, Y: np.ndarray, k: int, plan: SketchPlan) -> JointBasis:
    """Joint basis of range(X) + range(Y): X's basis first, then Y's, one seed."""
    rng = make_rng(plan.seed)
    Q1 = sketch_basis(X, k, plan, rng)
    Q2 = sketch_basis(Y, k, plan, rng)
    basis = joint_basis(Q1, Q2, plan.trunc_tol)
    logger.info(
        f"{plan.label()} joint basis: {basis.effective_cols} columns "
        f"(from {Q1.shape[1]} + {Q2.shape[1]})"
    )
    return basis
