"""Dense tensor helpers.

Tensors are plain numpy arrays.  Vectorization runs with the first mode
varying fastest (Fortran order), and the mode-k unfolding follows Kolda and
Bader: rows are indexed by mode k, the remaining modes are laid out in
ascending order with the lowest one varying fastest.  Under these
conventions

    vec((A_1, ..., A_K) . X) = (A_K kron ... kron A_1) vec(X).

Mode indices are zero-based, like numpy axes.
"""

from __future__ import annotations

import functools
import io
import os

import numpy as np

__all__ = [
    "TensorFormatError",
    "unfold",
    "fold",
    "vec",
    "unvec",
    "tucker_mult",
    "kron",
    "kron_all",
    "merge_modes",
    "split_mode",
    "frob_norm",
    "read_tensor",
    "write_tensor",
    "format_tensor",
    "parse_tensor",
]


class TensorFormatError(ValueError):
    """Malformed tensor text file.

    ``line``/``column`` are 1-based; ``offset`` is a 0-based byte offset.
    """

    def __init__(self, message, line=None, column=None, offset=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        full = f"{message} ({', '.join(where)})" if where else message
        super().__init__(full)
        self.line = line
        self.column = column
        self.offset = offset


def _check_mode(ndim, k):
    if not 0 <= k < ndim:
        raise IndexError(f"mode {k} out of range for an order-{ndim} tensor")


def unfold(T, k):
    """Mode-k unfolding, shape ``(p_k, prod_{i != k} p_i)``."""
    T = np.asarray(T)
    _check_mode(T.ndim, k)
    return np.reshape(np.moveaxis(T, k, 0), (T.shape[k], -1), order="F")


def fold(M, k, shape):
    """Inverse of :func:`unfold`."""
    M = np.asarray(M)
    shape = tuple(int(s) for s in shape)
    _check_mode(len(shape), k)
    rest = shape[:k] + shape[k + 1:]
    if M.ndim != 2 or M.shape[0] != shape[k] or M.shape[1] != int(np.prod(rest)):
        raise ValueError(
            f"matrix of shape {M.shape} cannot be folded along mode {k} into {shape}"
        )
    return np.moveaxis(np.reshape(M, (shape[k],) + rest, order="F"), 0, k)


def vec(T):
    return np.ravel(np.asarray(T), order="F")


def unvec(v, shape):
    v = np.asarray(v)
    if v.size != int(np.prod(shape)):
        raise ValueError(f"{v.size} values cannot fill shape {tuple(shape)}")
    return np.reshape(v, tuple(shape), order="F")


def mode_mult(T, A, k):
    """Multiply mode k of ``T`` by the matrix ``A`` (``A @ T_(k)``)."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[1] != T.shape[k]:
        raise ValueError(
            f"matrix of shape {A.shape} does not act on mode {k} of size {T.shape[k]}"
        )
    return np.moveaxis(np.tensordot(A, T, axes=(1, k)), 0, k)


def tucker_mult(mats, T):
    """Multilinear (Tucker) product ``(A_1, ..., A_K) . T``.

    ``mats`` holds one entry per mode of ``T``; ``None`` stands for the
    identity on that mode.
    """
    T = np.asarray(T, dtype=float)
    if len(mats) != T.ndim:
        raise ValueError(f"need {T.ndim} matrices, got {len(mats)}")
    out = T
    for k, A in enumerate(mats):
        if A is not None:
            out = mode_mult(out, A, k)
    return out


def kron(A, B):
    return np.kron(np.atleast_2d(A), np.atleast_2d(B))


def kron_all(mats):
    """``mats[0] kron mats[1] kron ...``; pass descending modes for vec identities."""
    return functools.reduce(kron, mats)


def merge_modes(T, j, k):
    """Merge adjacent modes ``j`` and ``k = j + 1`` into one of size ``p_j p_k``.

    The merged index runs with mode j fastest, so ``vec`` is unchanged and a
    covariance ``S_k kron S_j`` on the merged mode is the separable one.
    """
    T = np.asarray(T)
    _check_mode(T.ndim, j)
    _check_mode(T.ndim, k)
    if k != j + 1:
        raise ValueError(f"modes {j} and {k} are not adjacent; permute first")
    shape = T.shape[:j] + (T.shape[j] * T.shape[k],) + T.shape[k + 1:]
    return np.reshape(T, shape, order="F")


def split_mode(T, j, sizes):
    """Inverse of :func:`merge_modes`: split mode ``j`` into ``sizes``."""
    T = np.asarray(T)
    _check_mode(T.ndim, j)
    sizes = tuple(int(s) for s in sizes)
    if int(np.prod(sizes)) != T.shape[j]:
        raise ValueError(f"sizes {sizes} do not multiply to {T.shape[j]}")
    return np.reshape(T, T.shape[:j] + sizes + T.shape[j + 1:], order="F")


def frob_norm(T):
    return float(np.linalg.norm(np.ravel(T)))


# -- text format ------------------------------------------------------------
#
#   tensor K d1 ... dK
#   v1 v2 ...            (whitespace separated, vec order)


def format_tensor(T):
    T = np.asarray(T, dtype=float)
    buf = io.StringIO()
    buf.write("tensor %d %s\n" % (T.ndim, " ".join(str(d) for d in T.shape)))
    values = vec(T)
    per_line = T.shape[0] if T.ndim else 1
    per_line = max(1, min(per_line, 8))
    for start in range(0, values.size, per_line):
        chunk = values[start:start + per_line]
        buf.write(" ".join(format(float(x), ".17g") for x in chunk))
        buf.write("\n")
    return buf.getvalue()


def write_tensor(path, T):
    with open(path, "w") as fh:
        fh.write(format_tensor(T))


def _tokens(text):
    """Yield ``(token, line, column, offset)`` for whitespace-separated tokens."""
    offset = 0
    for lineno, line in enumerate(text.splitlines(keepends=True), start=1):
        col = 0
        n = len(line)
        while col < n:
            while col < n and line[col].isspace():
                col += 1
            if col >= n:
                break
            start = col
            while col < n and not line[col].isspace():
                col += 1
            yield line[start:col], lineno, start + 1, offset + len(line[:start].encode())
        offset += len(line.encode())


def parse_tensor(text):
    """Parse the tensor text format; errors carry line/column/byte offset."""
    toks = _tokens(text)
    end_offset = len(text.encode())
    first = next(toks, None)
    if first is None:
        raise TensorFormatError("empty tensor file", line=1, column=1, offset=0)
    word, line, col, off = first
    if word != "tensor" or line != 1:
        raise TensorFormatError(f"expected header 'tensor', found {word!r}", line, col, off)

    def next_int(what):
        tok = next(toks, None)
        if tok is None:
            raise TensorFormatError(f"missing {what} in header", offset=end_offset)
        w, ln, c, o = tok
        if ln != 1:
            raise TensorFormatError(f"missing {what} in header", ln, c, o)
        try:
            val = int(w)
        except ValueError:
            raise TensorFormatError(f"{what} must be an integer, got {w!r}", ln, c, o) from None
        return val, (ln, c, o)

    order, where = next_int("order")
    if order < 1:
        raise TensorFormatError(f"order must be positive, got {order}", *where)
    shape = []
    for i in range(order):
        d, where = next_int(f"size of mode {i + 1}")
        if d < 1:
            raise TensorFormatError(f"mode sizes must be positive, got {d}", *where)
        shape.append(d)

    expected = int(np.prod(shape))
    values = np.empty(expected)
    count = 0
    for w, ln, c, o in toks:
        if ln == 1:
            raise TensorFormatError("unexpected extra token in header", ln, c, o)
        if count >= expected:
            raise TensorFormatError(
                f"too many values: header declares {expected}", ln, c, o
            )
        try:
            values[count] = float(w)
        except ValueError:
            raise TensorFormatError(f"not a number: {w!r}", ln, c, o) from None
        count += 1
    if count < expected:
        raise TensorFormatError(
            f"too few values: header declares {expected} for shape {tuple(shape)}, "
            f"found {count}",
            offset=end_offset,
        )
    return unvec(values, shape)


def read_tensor(path):
    with open(os.fspath(path)) as fh:
        return parse_tensor(fh.read())
