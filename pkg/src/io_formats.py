"""Dense matrix and tensor file formats.

Text formats (.dmt matrices, .dtt tensors): a magic line (DMT1/DTT1), a line of
dimensions, then one line per row of the matrix (of the mode-1 unfolding for
tensors) with values at 17 significant digits.

Binary formats (.dmb, .dtb): 4 magic bytes (DMB1/DTB1), dimensions as unsigned
64-bit little-endian integers, then IEEE-754 binary64 little-endian values in
column-major order (the mode-1 unfolding's column-major order for tensors).
"""

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .errors import FormatError
from .tensor_core import as_matrix, as_tensor3, fold1, unfold1

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_TEXT_MAGIC = {".dmt": "DMT1", ".dtt": "DTT1"}
_BINARY_MAGIC = {".dmb": b"DMB1", ".dtb": b"DTB1"}
_NDIM = {".dmt": 2, ".dmb": 2, ".dtt": 3, ".dtb": 3}


def _suffix(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix not in _NDIM:
        raise FormatError(f"Unknown array file extension: {path.name}")
    return suffix


def save_array(path: PathLike, array: np.ndarray) -> Path:
    """Write a matrix or tensor; the format follows the file extension."""
    path = Path(path)
    suffix = _suffix(path)
    if _NDIM[suffix] == 2:
        array = as_matrix(array)
        matrix = array
    else:
        array = as_tensor3(array)
        matrix = unfold1(array)

    if suffix in _TEXT_MAGIC:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_TEXT_MAGIC[suffix] + "\n")
            fh.write(" ".join(str(d) for d in array.shape) + "\n")
            np.savetxt(fh, matrix, fmt="%.17g", delimiter=" ")
    else:
        header = _BINARY_MAGIC[suffix] + struct.pack(f"<{array.ndim}Q", *array.shape)
        payload = np.asarray(matrix, dtype="<f8").ravel(order="F").tobytes()
        path.write_bytes(header + payload)

    logger.debug(f"Wrote {array.shape} array to {path}")
    return path


def load_array(path: PathLike) -> np.ndarray:
    """Read a matrix or tensor written by `save_array`."""
    path = Path(path)
    suffix = _suffix(path)
    ndim = _NDIM[suffix]
    if suffix in _TEXT_MAGIC:
        dims, matrix = _read_text(path, _TEXT_MAGIC[suffix], ndim)
    else:
        dims, matrix = _read_binary(path, _BINARY_MAGIC[suffix], ndim)

    if ndim == 2:
        return as_matrix(matrix, path.name)
    return as_tensor3(fold1(matrix, dims), path.name)


def _read_text(path: Path, magic: str, ndim: int):
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != magic:
            raise FormatError(f"{path.name}: expected magic {magic!r}, got {first!r}")
        try:
            dims = tuple(int(tok) for tok in fh.readline().split())
        except ValueError as e:
            raise FormatError(f"{path.name}: malformed dimension line") from e
        if len(dims) != ndim or min(dims) < 1:
            raise FormatError(f"{path.name}: expected {ndim} positive dims, got {dims}")
        try:
            values = np.loadtxt(fh, dtype=np.float64, ndmin=2)
        except ValueError as e:
            raise FormatError(f"{path.name}: malformed values") from e

    rows, cols = dims[0], int(np.prod(dims[1:]))
    if values.shape != (rows, cols):
        raise FormatError(f"{path.name}: expected {rows}x{cols} values, got {values.shape}")
    return dims, values


def _read_binary(path: Path, magic: bytes, ndim: int):
    data = path.read_bytes()
    header_len = 4 + 8 * ndim
    if len(data) < header_len or data[:4] != magic:
        raise FormatError(f"{path.name}: missing {magic!r} header")
    dims = struct.unpack(f"<{ndim}Q", data[4:header_len])
    if min(dims) < 1:
        raise FormatError(f"{path.name}: non-positive dimension in {dims}")
    rows, cols = dims[0], int(np.prod(dims[1:]))
    expected = header_len + 8 * rows * cols
    if len(data) != expected:
        raise FormatError(f"{path.name}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=header_len)
    return dims, values.reshape((rows, cols), order="F").astype(np.float64)
