"""Matrix Market reading and writing for problem matrices."""
from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse

from .errors import MatrixFileError


def load_matrix(path):
    """Read a square matrix from a Matrix Market file as a dense complex/real array.

    Coordinate and array formats are accepted; symmetric (and skew/hermitian)
    storage is expanded to the full matrix.  Malformed headers, non-square
    shapes, and out-of-range indices raise :class:`MatrixFileError`.
    """
    try:
        mat = scipy.io.mmread(str(path))
    except Exception as exc:
        raise MatrixFileError(f"{path}: {exc}") from exc
    if scipy.sparse.issparse(mat):
        mat = mat.toarray()
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise MatrixFileError(f"{path}: expected a square matrix, got shape {mat.shape}")
    return mat


def save_matrix(path, matrix, comment=""):
    """Write a dense matrix in Matrix Market coordinate format.

    Values are written with ``repr`` so that a read round-trips
    bit-identically for float64 data.
    """
    matrix = np.atleast_2d(np.asarray(matrix))
    nrows, ncols = matrix.shape
    is_complex = np.iscomplexobj(matrix)
    field_name = "complex" if is_complex else "real"
    rows, cols = np.nonzero(matrix)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate {field_name} general\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"%{line}\n")
        fh.write(f"{nrows} {ncols} {len(rows)}\n")
        for r, c in zip(rows, cols):
            v = matrix[r, c]
            if is_complex:
                fh.write(f"{r + 1} {c + 1} {v.real!r} {v.imag!r}\n")
            else:
                fh.write(f"{r + 1} {c + 1} {v!r}\n")
