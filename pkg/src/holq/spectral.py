"""ISVD, HOOI and the truncated ISVD.

The ISVD rotates the HOLQ core: with ``L_k = U_k D_k V_k^T``,

    X = ell * (U_1, ..., U_K, I_n) . [(D_1, ..., D_K, I_n) . V]

where ``V = (V_1^T, ..., V_K^T, I_n) . Q`` stays scaled all-orthonormal.
The truncated version takes the ISVD of the HOOI core, so it fits exactly
as well as the HOOI does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import Diagnostics, HolqDecomposition, holq
from .linalg import svd
from .tensor import mode_mult, tucker_mult, unfold

__all__ = [
    "IsvdDecomposition",
    "HooiResult",
    "TruncatedIsvd",
    "isvd",
    "isvd_from_holq",
    "hosvd_truncate",
    "hooi",
    "truncated_isvd",
]


@dataclass
class IsvdDecomposition:
    ell: float
    U: list
    D: list
    core: np.ndarray
    holq: HolqDecomposition

    def reconstruct(self):
        inner = tucker_mult([None if d is None else np.diag(d) for d in self.D], self.core)
        return self.ell * tucker_mult(self.U, inner)


@dataclass
class HooiResult:
    factors: list
    core: np.ndarray
    residual: float
    n_iter: int
    fit_history: list

    def reconstruct(self):
        return tucker_mult(self.factors, self.core)


@dataclass
class TruncatedIsvd:
    ranks: tuple
    ell: float
    U: list
    D: list
    core: np.ndarray
    residual: float
    hooi: HooiResult
    diagnostics: Diagnostics = None

    def reconstruct(self):
        inner = tucker_mult([None if d is None else np.diag(d) for d in self.D], self.core)
        return self.ell * tucker_mult(self.U, inner)


def isvd_from_holq(d):
    Us, Ds, rots = [], [], []
    for L in d.factors:
        if L is None:
            Us.append(None)
            Ds.append(None)
            rots.append(None)
            continue
        Uk, s, Vk = svd(L)
        Us.append(Uk)
        Ds.append(s)
        rots.append(Vk.T)
    core = tucker_mult(rots, d.core)
    return IsvdDecomposition(ell=d.ell, U=Us, D=Ds, core=core, holq=d)


def isvd(T, opts=None):
    """Incredible SVD of ``T`` (last mode = samples)."""
    return isvd_from_holq(holq(T, opts))


def _leading_left(M, r):
    return svd(M)[0][:, :r]


def _check_ranks(shape, ranks):
    ranks = tuple(int(r) for r in ranks)
    K = len(shape) - 1
    if len(ranks) != K:
        raise ValueError(f"need {K} ranks for shape {shape}, got {len(ranks)}")
    for r, p in zip(ranks, shape):
        if not 1 <= r <= p:
            raise ValueError(f"rank {r} out of range 1..{p}")
    return ranks


def hosvd_truncate(T, ranks):
    """Truncated HOSVD: leading left singular vectors of each unfolding."""
    T = np.asarray(T, dtype=float)
    ranks = _check_ranks(T.shape, ranks)
    Vs = [_leading_left(unfold(T, k), r) for k, r in enumerate(ranks)] + [None]
    core = tucker_mult([None if V is None else V.T for V in Vs], T)
    return Vs, core


def hooi(T, ranks, tol=1e-10, max_iter=200):
    """Higher-order orthogonal iteration for a rank-``ranks`` Tucker fit.

    The sample (last) mode is left at full size.  Starts from the truncated
    HOSVD and stops when the core norm changes by less than ``tol``
    (relative) or after ``max_iter`` sweeps.
    """
    T = np.asarray(T, dtype=float)
    ranks = _check_ranks(T.shape, ranks)
    K = len(ranks)
    Vs, core = hosvd_truncate(T, ranks)
    fit = [float(np.linalg.norm(core))]
    it = 0
    for it in range(1, max_iter + 1):
        for k in range(K):
            Y = T
            for j in range(K):
                if j != k:
                    Y = mode_mult(Y, Vs[j].T, j)
            Vs[k] = _leading_left(unfold(Y, k), ranks[k])
        core = tucker_mult([None if V is None else V.T for V in Vs], T)
        fit.append(float(np.linalg.norm(core)))
        if abs(fit[-1] - fit[-2]) <= tol * fit[-2]:
            break
    residual = float(np.linalg.norm(T - tucker_mult(Vs, core)))
    return HooiResult(factors=Vs, core=core, residual=residual, n_iter=it, fit_history=fit)


def truncated_isvd(T, ranks, opts=None, hooi_tol=1e-10, hooi_max_iter=200):
    """Low-rank ISVD: the ISVD of the HOOI core, rotated back by the HOOI factors."""
    T = np.asarray(T, dtype=float)
    h = hooi(T, ranks, tol=hooi_tol, max_iter=hooi_max_iter)
    inner = isvd(h.core, opts)
    Us = []
    core = inner.core
    for k, (Vk, Wk) in enumerate(zip(h.factors, inner.U)):
        if Vk is None:
            Us.append(None)
            continue
        Uk = Vk @ Wk
        # same sign rule as the svd kernel, applied to the rotated columns
        idx = np.argmax(np.abs(Uk), axis=0)
        s = np.sign(Uk[idx, np.arange(Uk.shape[1])])
        s[s == 0] = 1.0
        Us.append(Uk * s)
        core = mode_mult(core, np.diag(s), k)
    out = TruncatedIsvd(
        ranks=tuple(ranks),
        ell=inner.ell,
        U=Us,
        D=inner.D,
        core=core,
        residual=0.0,
        hooi=h,
        diagnostics=inner.holq.diagnostics,
    )
    out.residual = float(np.linalg.norm(T - out.reconstruct()))
    return out
