"""Matrix factorizations and the normalized minimizers used by the solvers.

Every factorization that needs full row rank raises
:class:`RankDeficiencyError` when a pivot falls below ``RANK_TOL`` times the
Frobenius norm of its input.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

__all__ = [
    "RANK_TOL",
    "RankDeficiencyError",
    "NotPositiveDefiniteError",
    "NormalizedLq",
    "NormalizedPolar",
    "lq",
    "rq",
    "cholesky",
    "svd",
    "polar",
    "normalized_lq",
    "normalized_polar",
    "diag_minimizer",
    "unit_diag_minimizer",
    "log_det_tri",
]

RANK_TOL = 1e-12


class RankDeficiencyError(np.linalg.LinAlgError):
    """Input does not have the full row rank a factorization needs."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class NormalizedLq:
    """``X = ell * L @ Q`` with ``det L = 1`` and ``ell = ||L^{-1} X||``.

    ``Q`` has unit Frobenius norm, so ``Q Q^T = I/p``; ``rows`` gives the
    orthonormal-row factor ``sqrt(p) * Q`` of the ordinary LQ decomposition.
    """

    ell: float
    L: np.ndarray
    Q: np.ndarray

    @property
    def rows(self):
        return np.sqrt(self.Q.shape[0]) * self.Q


@dataclass(frozen=True)
class NormalizedPolar:
    """``X = ell * P @ W`` with ``tr P = 1`` and ``ell = ||P^{-1} X||``."""

    ell: float
    P: np.ndarray
    W: np.ndarray

    @property
    def rows(self):
        return np.sqrt(self.W.shape[0]) * self.W


def _as_matrix(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a matrix, got an array of shape {X.shape}")
    return X


@functools.lru_cache(maxsize=None)
def _strict_upper(p):
    return np.triu_indices(p, 1)


def _check_pivots(pivots, X, what):
    scale = np.sqrt((X * X).sum())
    if X.shape[0] > X.shape[1] or scale == 0.0 or np.abs(pivots).min() <= RANK_TOL * scale:
        raise RankDeficiencyError(f"{what}: input of shape {X.shape} is not of full row rank")


def log_det_tri(L):
    """log|det L| for a triangular matrix."""
    return float(np.sum(np.log(np.abs(np.diagonal(L)))))


def lq(X):
    """LQ decomposition ``X = L @ Q``; ``L`` has a positive diagonal.

    Computed from a Householder QR of ``X^T``.
    """
    X = _as_matrix(X)
    p, m = X.shape
    if p > m:
        raise RankDeficiencyError(f"lq: input of shape {X.shape} is not of full row rank")
    qr, tau, _, info = lapack.dgeqrf(X.T)
    L = qr[:p].T.copy()
    L[_strict_upper(p)] = 0.0
    Qt, _, info2 = lapack.dorgqr(qr[:, :p], tau)
    if info or info2:
        raise np.linalg.LinAlgError("LAPACK QR failed")
    d = L.diagonal()
    _check_pivots(d, X, "lq")
    s = np.where(d < 0, -1.0, 1.0)
    return L * s, Qt.T * s[:, None]


def rq(X):
    """RQ decomposition ``X = R @ Z``; ``R`` upper triangular, positive diagonal."""
    X = _as_matrix(X)
    L, Q = lq(X[::-1])
    return L[::-1, ::-1].copy(), Q[::-1].copy()


def cholesky(S):
    """Lower Cholesky factor of a symmetric positive definite matrix."""
    S = _as_matrix(S)
    if S.shape[0] != S.shape[1]:
        raise ValueError("cholesky needs a square matrix")
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("matrix is not positive definite") from None


def svd(X):
    """Thin SVD ``X = U @ diag(d) @ V.T`` with a deterministic sign choice.

    Singular values come out descending; in each column of ``U`` the entry of
    largest magnitude is positive (first such entry on ties).  A square
    diagonal input gets permutation factors, so ``svd(I)`` is ``(I, 1, I)``.
    """
    X = _as_matrix(X)
    p, n = X.shape
    if p == n and not np.any(X - np.diag(np.diagonal(X))):
        # diagonal input: values equal to ~12 digits count as tied, and the
        # stable sort keeps tied values in their original order
        x = np.diagonal(X)
        with np.errstate(divide="ignore"):
            key = np.round(np.log(np.abs(x)), 12)
        order = np.argsort(-key, kind="stable")
        eye = np.eye(p)
        sgn = np.where(x[order] < 0, -1.0, 1.0)
        return eye[:, order], np.abs(x[order]), eye[:, order] * sgn
    U, d, Vt = np.linalg.svd(X, full_matrices=False)
    idx = np.argmax(np.abs(U), axis=0)
    s = np.sign(U[idx, np.arange(U.shape[1])])
    s[s == 0] = 1.0
    return U * s, d, Vt.T * s


def polar(X):
    """Left polar decomposition ``X = P @ W`` of a wide full-rank matrix."""
    X = _as_matrix(X)
    U, d, Vt = np.linalg.svd(X, full_matrices=False)
    _check_pivots(d, X, "polar")
    P = (U * d) @ U.T
    return 0.5 * (P + P.T), U @ Vt


def normalized_lq(X):
    """Unit-determinant lower triangular ``L`` minimizing ``||L^{-1} X||``."""
    X = _as_matrix(X)
    L0, Q0 = lq(X)
    p = X.shape[0]
    c = np.exp(log_det_tri(L0) / p)
    L = L0 / c
    ell = c * np.sqrt(p)
    return NormalizedLq(ell=float(ell), L=L, Q=Q0 / np.sqrt(p))


def normalized_polar(X):
    """Unit-trace SPD ``P`` minimizing ``tr(P^{-1} X X^T)``."""
    X = _as_matrix(X)
    U, d, Vt = np.linalg.svd(X, full_matrices=False)
    _check_pivots(d, X, "normalized_polar")
    t = d.sum()
    P = (U * (d / t)) @ U.T
    P = 0.5 * (P + P.T)
    # P^{-1} X = t * U Vt, whose Frobenius norm is t * sqrt(p)
    p = X.shape[0]
    ell = t * np.sqrt(p)
    return NormalizedPolar(ell=float(ell), P=P, W=(U @ Vt) / np.sqrt(p))


def diag_minimizer(X):
    """Unit-determinant positive diagonal ``D`` minimizing ``||D^{-1} X||``.

    ``D_ii = (S_ii / geomean(S_11, ..., S_pp))^{1/2}`` with ``S = X X^T``.
    """
    X = _as_matrix(X)
    s = np.einsum("ij,ij->i", X, X)
    if np.any(s <= (RANK_TOL * np.linalg.norm(X)) ** 2):
        raise RankDeficiencyError("diag_minimizer: input has a zero row")
    logs = np.log(s)
    return np.diag(np.exp(0.5 * (logs - logs.mean())))


def unit_diag_minimizer(X):
    """Unit-diagonal lower triangular ``L`` minimizing ``||L^{-1} X||``.

    Returns ``(L, F @ Q)`` where ``X = L0 @ Q`` is the LQ decomposition and
    ``F = diag(L0)``; the remainder has mutually orthogonal rows and
    ``X = L @ (F @ Q)``.
    """
    L0, Q0 = lq(X)
    f = np.diagonal(L0).copy()
    return L0 / f, f[:, None] * Q0
