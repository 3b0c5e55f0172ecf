"""Matrix Market coordinate files and plain-text vector files."""

from __future__ import annotations

import os

import numpy as np

from .sparse import SparseMatrix

HEADER = "%%MatrixMarket matrix coordinate real general"


class FormatError(ValueError):
    """Malformed matrix or vector file."""


def _fmt(v: float) -> str:
    return "%.17g" % v


def write_matrix_market(a: SparseMatrix, path) -> None:
    lines = [HEADER, f"{a.rows} {a.cols} {a.nnz}"]
    ptr, idx, val = a.row_offsets, a.col_indices, a.values
    for i in range(a.rows):
        for k in range(ptr[i], ptr[i + 1]):
            lines.append(f"{i + 1} {idx[k] + 1} {_fmt(val[k])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_market(path) -> SparseMatrix:
    with open(path) as fh:
        text = fh.read().splitlines()
    if not text:
        raise FormatError(f"{path}: empty file")
    head = text[0].split()
    if len(head) != 5 or head[0] != "%%MatrixMarket" or [h.lower() for h in head[1:]] != [
        "matrix", "coordinate", "real", "general"
    ]:
        raise FormatError(f"{path}:1: expected header '{HEADER}', got '{text[0]}'")
    body = [(ln, s.strip()) for ln, s in enumerate(text[1:], start=2) if s.strip() and not s.lstrip().startswith("%")]
    if not body:
        raise FormatError(f"{path}: missing size line")
    ln, size = body[0]
    try:
        rows, cols, nnz = (int(t) for t in size.split())
    except ValueError:
        raise FormatError(f"{path}:{ln}: bad size line '{size}'") from None
    if rows < 0 or cols < 0 or nnz < 0:
        raise FormatError(f"{path}:{ln}: negative size")
    entries = body[1:]
    if len(entries) != nnz:
        raise FormatError(f"{path}: header declares {nnz} entries, found {len(entries)}")
    r = np.empty(nnz, dtype=np.int64)
    c = np.empty(nnz, dtype=np.int64)
    v = np.empty(nnz)
    for k, (ln, s) in enumerate(entries):
        parts = s.split()
        if len(parts) != 3:
            raise FormatError(f"{path}:{ln}: expected 'row col value', got '{s}'")
        try:
            i, j, x = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise FormatError(f"{path}:{ln}: cannot parse '{s}'") from None
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise FormatError(f"{path}:{ln}: index ({i}, {j}) outside {rows}x{cols}")
        r[k], c[k], v[k] = i - 1, j - 1, x
    try:
        return SparseMatrix.from_coo(rows, cols, r, c, v)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_vector(v, path) -> None:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    with open(path, "w") as fh:
        fh.write(f"{v.size}\n")
        fh.writelines(_fmt(x) + "\n" for x in v)


def read_vector(path) -> np.ndarray:
    with open(path) as fh:
        lines = [s.strip() for s in fh.read().splitlines()]
    lines = [s for s in lines if s]
    if not lines:
        raise FormatError(f"{path}: empty vector file")
    try:
        n = int(lines[0])
    except ValueError:
        raise FormatError(f"{path}:1: first line must be the vector length") from None
    if len(lines) - 1 != n:
        raise FormatError(f"{path}: declares length {n}, found {len(lines) - 1} values")
    try:
        return np.array([float(s) for s in lines[1:]], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def require_file(directory, name) -> str:
    path = os.path.join(directory, name)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"missing {name} in {directory}")
    return path
