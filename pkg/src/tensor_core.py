"""Dense matrices, order-3 tensors and the multilinear algebra on them.

Matrices and tensors are plain float64 numpy arrays. Matricizations follow the
Kolda-Bader fiber ordering, which coincides with Fortran-order reshapes:

    X_(1): element (i, j, l) -> row i, column j + l*n2
    X_(2): element (i, j, l) -> row j, column i + l*n1
    X_(3): element (i, j, l) -> row l, column i + j*n1

Modes are numbered 1, 2, 3 as in the literature.
"""

from typing import Sequence

import numpy as np
from scipy.linalg import subspace_angles

from .errors import ShapeError


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and convert to a finite, non-empty float64 matrix."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ShapeError(f"{name} must have positive dimensions, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite entries")
    return arr


def as_tensor3(a, name: str = "tensor") -> np.ndarray:
    """Validate and convert to a finite, non-empty float64 order-3 tensor."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 3:
        raise ShapeError(f"{name} must be 3-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ShapeError(f"{name} must have positive dimensions, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite entries")
    return arr


def _check_mode(mode: int) -> int:
    if mode not in (1, 2, 3):
        raise ShapeError(f"mode must be 1, 2 or 3, got {mode}")
    return mode - 1


def unfold(T: np.ndarray, mode: int) -> np.ndarray:
    """Mode-n matricization."""
    T = as_tensor3(T)
    axis = _check_mode(mode)
    return np.moveaxis(T, axis, 0).reshape(T.shape[axis], -1, order="F")


def fold(M: np.ndarray, mode: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of `unfold` for the given tensor dimensions."""
    M = as_matrix(M)
    axis = _check_mode(mode)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise ShapeError(f"dims must have three entries, got {dims}")
    others = [d for i, d in enumerate(dims) if i != axis]
    if M.shape != (dims[axis], others[0] * others[1]):
        raise ShapeError(
            f"cannot fold a {M.shape} matrix in mode {mode} into dims {dims}"
        )
    moved = M.reshape((dims[axis], *others), order="F")
    return np.moveaxis(moved, 0, axis)


def unfold1(T: np.ndarray) -> np.ndarray:
    """Mode-1 matricization, n1 x (n2*n3)."""
    return unfold(T, 1)


def fold1(M: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Fold an n1 x (n2*n3) matrix back into an n1 x n2 x n3 tensor."""
    return fold(M, 1, dims)


def mode_product(T: np.ndarray, M: np.ndarray, mode: int) -> np.ndarray:
    """T x_mode M: multiply every mode-n fiber of T by M."""
    T = as_tensor3(T)
    M = as_matrix(M)
    axis = _check_mode(mode)
    if M.shape[1] != T.shape[axis]:
        raise ShapeError(
            f"mode-{mode} product needs {T.shape[axis]} columns, got {M.shape}"
        )
    dims = list(T.shape)
    dims[axis] = M.shape[0]
    return fold(M @ unfold(T, mode), mode, dims)


def khatri_rao(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product; column j is a_j (x) b_j."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise ShapeError(f"column counts differ: {A.shape[1]} vs {B.shape[1]}")
    r = A.shape[1]
    return (A[:, None, :] * B[None, :, :]).reshape(-1, r)


def hadamard(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Element-wise product of equally shaped matrices."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape != B.shape:
        raise ShapeError(f"shapes differ: {A.shape} vs {B.shape}")
    return A * B


def cp_reconstruct(A: np.ndarray, B: np.ndarray, C: np.ndarray) -> np.ndarray:
    """[[A, B, C]] = sum_t a_t o b_t o c_t."""
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    C = as_matrix(C, "C")
    if not A.shape[1] == B.shape[1] == C.shape[1]:
        raise ShapeError(
            f"factor column counts differ: {A.shape[1]}, {B.shape[1]}, {C.shape[1]}"
        )
    return np.einsum("it,jt,lt->ijl", A, B, C)


def frobenius_norm(M: np.ndarray) -> float:
    """sqrt of the sum of squared entries of a matrix."""
    return float(np.linalg.norm(as_matrix(M), "fro"))


def tensor_norm(T: np.ndarray) -> float:
    return float(np.linalg.norm(as_tensor3(T).ravel()))


def spectrum(M: np.ndarray) -> np.ndarray:
    """Singular values, descending."""
    return np.linalg.svd(as_matrix(M), compute_uv=False)


def numerical_rank(M: np.ndarray, rel_tol: float = 1e-10) -> int:
    """Count of singular values above rel_tol * sigma_1."""
    sv = spectrum(M)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rel_tol * sv[0]))


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Principal angles (radians, ascending) between range(A) and range(B)."""
    return np.sort(subspace_angles(as_matrix(A, "A"), as_matrix(B, "B")))

