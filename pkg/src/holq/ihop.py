"""Incredible higher-order polar (IHOP) decomposition.

    X = ell * (P_1, ..., P_K, I_n) . W

with symmetric positive definite, unit-trace ``P_k`` minimizing
``tr[(P_K^{-1} kron ... kron P_1^{-1}) X_(K+1)^T X_(K+1)]``.  The solver works
with Cholesky factors ``L_k`` of unit Frobenius norm (``P_k = L_k L_k^T``).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_solve

from .engine import (
    Diagnostics,
    NonExistenceError,
    SolverOptions,
    _check_divergence,
    apply_inverse,
)
from .linalg import RankDeficiencyError, cholesky, polar
from .tensor import fold, tucker_mult, unfold

__all__ = ["IhopDecomposition", "ihop", "ihop_plain", "fixed_point_residuals"]


@dataclass
class IhopDecomposition:
    ell: float
    P: list
    core: np.ndarray
    chol_factors: list
    criterion: float
    diagnostics: Diagnostics

    def reconstruct(self):
        return self.ell * tucker_mult(self.P, self.core)

    @property
    def converged(self):
        return self.diagnostics.converged


def fixed_point_residuals(R, factors):
    """``||R_(k) R_(k)^T - L_k^T L_k||`` per mode; zero at a fixed point.

    ``R`` is the unit-norm core ``(L_1^{-1}, ...) . X / ell`` and the ``L_k``
    have unit Frobenius norm.
    """
    out = []
    for k, L in enumerate(factors):
        if L is None:
            out.append(None)
            continue
        Rk = unfold(R, k)
        out.append(float(np.linalg.norm(Rk @ Rk.T - L.T @ L)))
    return out


def _initial(shape, init):
    K = len(shape) - 1
    if init is None:
        return [np.eye(p) / np.sqrt(p) for p in shape[:K]] + [None]
    if len(init) not in (K, K + 1):
        raise ValueError(f"need {K} initial factors, got {len(init)}")
    out = []
    for p, L in zip(shape[:K], init):
        L = np.array(L, dtype=float)
        if L.shape != (p, p) or np.any(np.triu(L, 1) != 0) or np.any(np.diagonal(L) <= 0):
            raise ValueError("initial factors must be lower triangular with positive diagonal")
        out.append(L / np.linalg.norm(L))
    return out + [None]


def ihop(T, opts=None, callback=None):
    """IHOP of ``T``; the last mode is the sample mode.

    ``opts.variant`` picks the orthogonalized sweep (default) or the plain
    one that re-solves against ``T`` for each mode.
    """
    opts = opts or SolverOptions()
    T = np.asarray(T, dtype=float)
    if T.ndim < 2:
        raise ValueError("ihop needs an array of order at least 2")
    K = T.ndim - 1
    for k in range(K):
        Tk = unfold(T, k)
        sv = np.linalg.svd(Tk, compute_uv=False)
        if Tk.shape[0] > Tk.shape[1] or sv[-1] <= 1e-12 * np.linalg.norm(T):
            raise RankDeficiencyError(f"mode {k} unfolding of shape {Tk.shape} is not of full row rank")

    factors = _initial(T.shape, opts.init)
    Y = apply_inverse(T, factors)
    ell = float(np.linalg.norm(Y))
    R = Y / ell
    ell0 = ell
    history = [ell]
    diag = Diagnostics(n_iter=0, converged=False, history=history, options=opts.as_dict())

    it = 0
    for it in range(1, opts.max_iter + 1):
        try:
            if opts.variant == "orthogonalized":
                for k in range(K):
                    P, Z = polar(factors[k] @ unfold(R, k))
                    L = cholesky(P)
                    Rk = L.T @ Z
                    nl = np.linalg.norm(L)
                    nr = np.linalg.norm(Rk)
                    ell = ell * nl * nr
                    factors[k] = L / nl
                    R = fold(Rk / nr, k, T.shape)
            else:
                for k in range(K):
                    others = [None if j == k else L for j, L in enumerate(factors)]
                    P, _ = polar(unfold(apply_inverse(T, others), k))
                    L = cholesky(P)
                    factors[k] = L / np.linalg.norm(L)
                Y = apply_inverse(T, factors)
                ell = float(np.linalg.norm(Y))
                R = Y / ell
        except RankDeficiencyError as exc:
            raise NonExistenceError(
                f"IHOP may not exist: core lost rank at sweep {it} ({exc})"
            ) from exc
        history.append(ell)
        if callback is not None:
            callback(it, [None if L is None else L.copy() for L in factors], ell)

        change = abs(history[-2] - ell) / history[-2]
        done = False
        if change < opts.tol:
            res = fixed_point_residuals(R, factors)
            done = max(r for r in res if r is not None) < opts.core_tol
        if done or it % 10 == 0 or it == opts.max_iter:
            _check_divergence(factors, ell, ell0, it, opts)
        if done:
            diag.converged = True
            break

    diag.n_iter = it
    diag.core_residuals = fixed_point_residuals(R, factors)
    Ps = [None if L is None else L @ L.T for L in factors]
    # W is recomputed from T: (P_1^{-1}, ..., P_K^{-1}, I) . T, normalized
    V = T
    for k, L in enumerate(factors):
        if L is not None:
            V = fold(cho_solve((L, True), unfold(V, k)), k, T.shape)
    ell_w = float(np.linalg.norm(V))
    Ps = [None if P is None else 0.5 * (P + P.T) for P in Ps]
    return IhopDecomposition(
        ell=ell_w,
        P=Ps,
        core=V / ell_w,
        chol_factors=factors,
        criterion=ell,
        diagnostics=diag,
    )


def ihop_plain(T, opts=None, callback=None):
    """IHOP by the plain block coordinate descent (reference for :func:`ihop`)."""
    opts = replace(opts or SolverOptions(), variant="plain")
    return ihop(T, opts, callback)
