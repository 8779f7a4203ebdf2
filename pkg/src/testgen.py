"""Seeded generators for the synthetic benchmark families.

Every generator is a pure function of its parameters and seed. Where an
orthonormal factor must share leading columns with another one, the remaining
columns are drawn from the orthogonal complement of the shared ones, so the
stated spectra and shared subspaces hold exactly.
"""

import logging
from typing import Dict, Tuple

import numpy as np

from .errors import ParameterError
from .models import InstanceSpec
from .sketching import make_rng, thin_qr
from .tensor_core import cp_reconstruct

logger = logging.getLogger(__name__)

Pair = Tuple[np.ndarray, np.ndarray]

SPARSE_DENSITY = 0.25


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ParameterError(message)


def _orth(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal columns from the QR of a uniform [0, 1) matrix."""
    return thin_qr(rng.random((rows, cols)))[0]


def _extend(basis: np.ndarray, cols: int, rng: np.random.Generator) -> np.ndarray:
    """[basis, orthonormal columns from the orthogonal complement of basis]."""
    rows = basis.shape[0]
    if cols == 0:
        return basis
    fresh = rng.random((rows, cols))
    if basis.shape[1]:
        for _ in range(2):
            fresh = fresh - basis @ (basis.T @ fresh)
    return np.hstack([basis, thin_qr(fresh)[0]])


def _low_rank_uniform(rows: int, cols: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    return rng.random((rows, rank)) @ rng.random((rank, cols))


def synthetic1(m: int, n1: int, n2: int, r1: int, r2: int, seed: int) -> Pair:
    """Products of uniform factors with ranks r1 and r2 and no spectral structure."""
    _require(1 <= r1 <= min(m, n1), f"r1={r1} must lie in [1, min(m, n1)={min(m, n1)}]")
    _require(1 <= r2 <= min(m, n2), f"r2={r2} must lie in [1, min(m, n2)={min(m, n2)}]")
    rng = make_rng(seed)
    X = _low_rank_uniform(m, n1, r1, rng)
    Y = _low_rank_uniform(m, n2, r2, rng)
    return X, Y


def _polynomial_spectrum(n: int, r: int, d: float) -> np.ndarray:
    """r ones followed by 2^-d, 3^-d, ... up to n entries."""
    tail = np.arange(2, n - r + 2, dtype=np.float64) ** (-d)
    return np.concatenate([np.ones(r), tail])


def synthetic2(n: int, r: int, d: float, c: int, seed: int) -> Pair:
    """Square X, Y with polynomially decaying spectra sharing c singular directions.

    X has r unit singular values followed by j^-d decay; Y has r unit values
    followed by harmonic decay, and its first c left and right singular
    vectors are those of X.
    """
    _require(1 <= r <= n, f"r={r} must lie in [1, n={n}]")
    _require(1 <= c <= n, f"c={c} must lie in [1, n={n}]")
    _require(d >= 1, f"d={d} must be >= 1")
    rng = make_rng(seed)
    UX = _orth(n, n, rng)
    VX = _orth(n, n, rng)
    X = (UX * _polynomial_spectrum(n, r, d)) @ VX.T

    UY = _extend(UX[:, :c], n - c, rng)
    VY = _extend(VX[:, :c], n - c, rng)
    Y = (UY * _polynomial_spectrum(n, r, 1.0)) @ VY.T
    return X, Y


def _sparse_vectors(length: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Columns with entries nonzero w.p. SPARSE_DENSITY, nonzeros uniform on (0, 1)."""
    mask = rng.random((length, count)) < SPARSE_DENSITY
    values = rng.uniform(np.nextafter(0.0, 1.0), 1.0, size=(length, count))
    return np.where(mask, values, 0.0)


def synthetic3(m: int, n: int, r: int, seed: int) -> Pair:
    """Sums of sparse outer products; the first r terms (weights 10/j) are shared.

    X = sum_{j<=r} (10/j) x_j y_j^T + sum_{j>r} (1/j) x_j y_j^T, and Y has the
    same head with an independent tail.
    """
    p = min(m, n)
    _require(1 <= r <= p, f"r={r} must lie in [1, min(m, n)={p}]")
    rng = make_rng(seed)
    j = np.arange(1, p + 1, dtype=np.float64)
    weights = np.where(j <= r, 10.0 / j, 1.0 / j)

    head_left = _sparse_vectors(m, r, rng)
    head_right = _sparse_vectors(n, r, rng)
    head = (head_left * weights[:r]) @ head_right.T

    def tail() -> np.ndarray:
        left = _sparse_vectors(m, p - r, rng)
        right = _sparse_vectors(n, p - r, rng)
        return (left * weights[r:]) @ right.T

    X = head + tail()
    Y = head + tail()
    return X, Y


def synthetic4(m: int, n1: int, n2: int, r2: int, seed: int) -> Pair:
    """Ill-conditioned X with sigma_i = 2^-i paired with a rank-r2 uniform product Y."""
    _require(1 <= n1 <= m, f"n1={n1} must lie in [1, m={m}]")
    _require(1 <= r2 <= min(m, n2), f"r2={r2} must lie in [1, min(m, n2)={min(m, n2)}]")
    rng = make_rng(seed)
    X = _orth(m, n1, rng) * 2.0 ** -np.arange(1, n1 + 1)
    Y = _low_rank_uniform(m, n2, r2, rng)
    return X, Y


def synthetic5(m: int, n1: int, n2: int, shared: int, seed: int) -> Pair:
    """Both matrices with 2^-i spectra whose left factors share `shared` columns."""
    _require(n1 <= m and n2 <= m, f"n1={n1} and n2={n2} must not exceed m={m}")
    _require(0 <= shared <= min(n1, n2), f"shared={shared} must lie in [0, min(n1, n2)]")
    rng = make_rng(seed)
    UA = _orth(m, n1, rng)
    UB = _extend(UA[:, :shared], n2 - shared, rng)
    X = UA * 2.0 ** -np.arange(0, n1)
    Y = UB * 2.0 ** -np.arange(0, n2)
    return X, Y


def tensor_test(n: int, r: int, d: float, r1: int, r2: int, r3: int, seed: int) -> Pair:
    """n x n x 3 tensor whose slices share r_i singular directions with Y.

    Y = UY S VY^T with S = diag(1, ..., 1, d^-2, ..., d^-(n-r+1)); slice i is
    [UY(:, :r_i) complement] S [VY(:, :r_i) complement]^T.
    """
    _require(1 <= r <= n, f"r={r} must lie in [1, n={n}]")
    _require(max(r1, r2, r3) <= n and min(r1, r2, r3) >= 0,
             f"slice ranks ({r1}, {r2}, {r3}) must lie in [0, n={n}]")
    _require(d > 0, f"d={d} must be positive")
    rng = make_rng(seed)
    S = np.concatenate([np.ones(r), float(d) ** -np.arange(2, n - r + 2, dtype=np.float64)])
    UY = _orth(n, n, rng)
    VY = _orth(n, n, rng)
    Y = (UY * S) @ VY.T

    T = np.empty((n, n, 3))
    for slot, ri in enumerate((r1, r2, r3)):
        left = _extend(UY[:, :ri], n - ri, rng)
        right = _extend(VY[:, :ri], n - ri, rng)
        T[:, :, slot] = (left * S) @ right.T
    return T, Y


def planted_cp(m: int, n2: int, n3: int, n: int, r: int, seed: int) -> Pair:
    """T = [[U, B, C]], Y = U W^T with standard normal factors (exact coupled rank r)."""
    _require(1 <= r <= min(m, n2, n3, n), f"r={r} must lie in [1, {min(m, n2, n3, n)}]")
    rng = make_rng(seed)
    U = rng.standard_normal((m, r))
    B = rng.standard_normal((n2, r))
    C = rng.standard_normal((n3, r))
    W = rng.standard_normal((n, r))
    return cp_reconstruct(U, B, C), U @ W.T


_GENERATORS = {
    "synthetic1": synthetic1,
    "synthetic2": synthetic2,
    "synthetic3": synthetic3,
    "synthetic4": synthetic4,
    "synthetic5": synthetic5,
    "tensor_test": tensor_test,
    "planted_cp": planted_cp,
}


def generate(spec: InstanceSpec) -> Dict[str, np.ndarray]:
    """Build the instance an InstanceSpec describes.

    Returns:
        {"X": ..., "Y": ...} for matrix families, {"T": ..., "Y": ...} for tensors
    """
    first, second = _GENERATORS[spec.family](**spec.params(), seed=spec.seed)
    logger.info(f"Generated {spec.family} instance {first.shape} / {second.shape} (seed={spec.seed})")
    key = "T" if first.ndim == 3 else "X"
    return {key: first, "Y": second}
