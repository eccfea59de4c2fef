"""Block coordinate descent for the HOLQ, HOLQ juniors and the HORQ.

The HOLQ of a ``p_1 x ... x p_K x n`` array ``X`` is

    X = ell * (L_1, ..., L_K, I_n) . Q

where each ``L_k`` is lower triangular with positive diagonal and unit
determinant and ``(L_1, ..., L_K)`` minimizes
``||(L_1^{-1}, ..., L_K^{-1}, I_n) . X||``.  A junior restricts some of the
factors to diagonal, unit-diagonal lower triangular or identity matrices.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .linalg import (
    RankDeficiencyError,
    diag_minimizer,
    log_det_tri,
    lq,
    normalized_lq,
    rq,
    unit_diag_minimizer,
)
from .tensor import fold, tucker_mult, unfold, unvec, vec

__all__ = [
    "ModeConstraint",
    "parse_constraints",
    "SolverOptions",
    "Diagnostics",
    "HolqDecomposition",
    "HorqDecomposition",
    "HolqError",
    "NonExistenceError",
    "criterion",
    "apply_inverse",
    "holq",
    "holq_junior",
    "horq",
    "check_core",
]


class ModeConstraint(enum.Enum):
    UNRESTRICTED = "u"
    DIAGONAL = "d"
    UNIT_DIAG_CHOLESKY = "c"
    IDENTITY = "i"

    def __str__(self):
        return self.value


U, D, C, I = (
    ModeConstraint.UNRESTRICTED,
    ModeConstraint.DIAGONAL,
    ModeConstraint.UNIT_DIAG_CHOLESKY,
    ModeConstraint.IDENTITY,
)


def parse_constraints(spec):
    """``"uudi"`` -> list of :class:`ModeConstraint`; whitespace is ignored."""
    if isinstance(spec, str):
        out = []
        for ch in spec:
            if ch.isspace():
                continue
            try:
                out.append(ModeConstraint(ch.lower()))
            except ValueError:
                raise ValueError(f"unknown constraint letter {ch!r} (use u, d, c, i)") from None
        return out
    return [c if isinstance(c, ModeConstraint) else ModeConstraint(c) for c in spec]


class HolqError(RuntimeError):
    pass


class NonExistenceError(HolqError):
    """The minimizer appears not to exist (factors blow up)."""


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 500
    variant: str = "orthogonalized"
    blowup_cond: float = 1e12
    # at exit every constrained mode's core residual must be below this
    core_tol: float = 1e-9
    init: tuple | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.variant not in ("orthogonalized", "plain"):
            raise ValueError(f"unknown variant {self.variant!r}")

    def as_dict(self):
        return {
            "tol": self.tol,
            "max_iter": self.max_iter,
            "variant": self.variant,
            "blowup_cond": self.blowup_cond,
            "core_tol": self.core_tol,
            "init": "identity" if self.init is None else "user",
        }


@dataclass
class Diagnostics:
    n_iter: int
    converged: bool
    history: list = field(default_factory=list)
    core_residuals: list = field(default_factory=list)
    options: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "n_iter": self.n_iter,
            "converged": self.converged,
            "history": list(self.history),
            "core_residuals": list(self.core_residuals),
            "options": dict(self.options),
        }


@dataclass
class HolqDecomposition:
    ell: float
    factors: list
    core: np.ndarray
    constraints: list
    diagnostics: Diagnostics

    def reconstruct(self):
        return self.ell * tucker_mult(self.factors, self.core)

    @property
    def converged(self):
        return self.diagnostics.converged


@dataclass
class HorqDecomposition:
    r: float
    factors: list
    core: np.ndarray

    def reconstruct(self):
        return self.r * tucker_mult(self.factors, self.core)


def _solve_lower(L, M):
    return solve_triangular(L, M, lower=True, check_finite=False)


def apply_inverse(T, factors):
    """``(L_1^{-1}, ..., L_K^{-1}) . T`` via triangular solves; ``None`` = identity."""
    Y = np.asarray(T, dtype=float)
    shape = Y.shape
    for k, L in enumerate(factors):
        if L is None:
            continue
        Y = fold(_solve_lower(L, unfold(Y, k)), k, shape)
    return Y


def criterion(T, factors):
    """``||(L_1^{-1}, ..., L_K^{-1}) . T||`` without forming inverses."""
    for L in factors:
        if L is not None and np.any(np.diagonal(L) == 0):
            raise np.linalg.LinAlgError("singular factor")
    return float(np.linalg.norm(apply_inverse(T, factors)))


def check_core(core, constraints):
    """Per-mode residual of the structure a converged core must have.

    Unrestricted: ``||G - I/p||``; diagonal: ``||diag(G) - 1/p||``;
    unit-diagonal Cholesky: off-diagonal mass of ``G``; identity: ``None``.
    Here ``G = Q_(k) Q_(k)^T``.
    """
    core = np.asarray(core)
    out = []
    for k, c in enumerate(parse_constraints(constraints)):
        if c is I:
            out.append(None)
            continue
        Qk = unfold(core, k)
        G = Qk @ Qk.T
        p = G.shape[0]
        if c is U:
            out.append(float(np.linalg.norm(G - np.eye(p) / p)))
        elif c is D:
            out.append(float(np.linalg.norm(np.diagonal(G) - 1.0 / p)))
        else:
            out.append(float(np.linalg.norm(G - np.diag(np.diagonal(G)))))
    return out


def _initial_factors(shape, constraints, init):
    if init is None:
        return [None if c is I else np.eye(p) for p, c in zip(shape, constraints)]
    if len(init) != len(shape):
        raise ValueError(f"need {len(shape)} initial factors, got {len(init)}")
    out = []
    for p, c, L in zip(shape, constraints, init):
        if c is I:
            out.append(None)
            continue
        L = np.array(L, dtype=float)
        if L.shape != (p, p):
            raise ValueError(f"initial factor of shape {L.shape}, expected {(p, p)}")
        d = np.diagonal(L)
        if np.any(np.triu(L, 1) != 0) or np.any(d <= 0):
            raise ValueError("initial factors must be lower triangular with positive diagonal")
        if c is D and np.any(np.tril(L, -1) != 0):
            raise ValueError("initial factor for a diagonal mode must be diagonal")
        if c is C:
            L = L / d
        else:
            L = L / np.exp(log_det_tri(L) / p)
        out.append(L)
    return out


def _check_rank(T, constraints):
    scale = np.linalg.norm(T)
    for k, c in enumerate(constraints):
        if c is I:
            continue
        Tk = unfold(T, k)
        if c is D:
            rows = np.linalg.norm(Tk, axis=1)
            if scale == 0 or rows.min() <= 1e-12 * scale:
                raise RankDeficiencyError(f"mode {k} unfolding has a zero row")
        else:
            sv = np.linalg.svd(Tk, compute_uv=False)
            if Tk.shape[0] > Tk.shape[1] or scale == 0 or sv[-1] <= 1e-12 * scale:
                raise RankDeficiencyError(
                    f"mode {k} unfolding of shape {Tk.shape} is not of full row rank"
                )


class _Layout:
    """Gather/scatter indices so that unfoldings of a flat (vec order) core are cheap."""

    def __init__(self, shape):
        self.shape = shape
        self.size = int(np.prod(shape))
        idx = np.arange(self.size).reshape(shape, order="F")
        self.perm = [unfold(idx, k).ravel() for k in range(len(shape))]

    def unfold(self, q, k):
        return q[self.perm[k]].reshape(self.shape[k], -1)

    def fold(self, Mk, k):
        q = np.empty(self.size)
        q[self.perm[k]] = Mk.ravel()
        return q

    def residuals(self, q, constraints):
        out = []
        for k, c in enumerate(constraints):
            if c is I:
                out.append(None)
                continue
            Qk = self.unfold(q, k)
            G = Qk @ Qk.T
            p = G.shape[0]
            if c is U:
                G[np.diag_indices(p)] -= 1.0 / p
                out.append(float(np.sqrt(np.sum(G * G))))
            elif c is D:
                r = np.diagonal(G) - 1.0 / p
                out.append(float(np.sqrt(r @ r)))
            else:
                G[np.diag_indices(p)] = 0.0
                out.append(float(np.sqrt(np.sum(G * G))))
        return out


@functools.lru_cache(maxsize=64)
def _layout(shape):
    return _Layout(shape)


def _orth_update(layout, q, ell, factors, k, c):
    """One orthogonalized block update of mode ``k``; returns ``(q, ell)``."""
    Qk = layout.unfold(q, k)
    p = Qk.shape[0]
    if c is U:
        L, Z = lq(Qk)
        Lk = factors[k] @ L
        g = np.exp(np.log(Lk.diagonal()).sum() / p)
        nz = np.sqrt((Z * Z).sum())
        ell = ell * g * nz
        factors[k] = Lk / g
        Qk = Z / nz
    elif c is D:
        f = np.sqrt(np.einsum("ij,ij->i", Qk, Qk))
        G = Qk / f[:, None]
        g = np.exp(np.log(f).sum() / p)
        ng = np.sqrt((G * G).sum())
        ell = ell * g * ng
        factors[k] = factors[k] * (f / g)
        Qk = G / ng
    else:
        L, Z = lq(Qk)
        f = L.diagonal().copy()
        factors[k] = factors[k] @ (L / f)
        FZ = f[:, None] * Z
        nf = np.sqrt((FZ * FZ).sum())
        ell = ell * nf
        Qk = FZ / nf
    return layout.fold(Qk, k), ell


def _plain_update(T, factors, k, c):
    others = [None if j == k else L for j, L in enumerate(factors)]
    Yk = unfold(apply_inverse(T, others), k)
    if c is U:
        factors[k] = normalized_lq(Yk).L
    elif c is D:
        factors[k] = diag_minimizer(Yk)
    else:
        factors[k] = unit_diag_minimizer(Yk)[0]


def _max_cond(factors):
    conds = [np.linalg.cond(L) for L in factors if L is not None and L.shape[0] > 1]
    return max(conds) if conds else 1.0


def holq_junior(T, constraints, opts=None, callback=None):
    """HOLQ junior of ``T`` under one :class:`ModeConstraint` per mode.

    ``callback(iteration, factors, ell)`` is called after every sweep with
    copies of the current factors.
    """
    opts = opts or SolverOptions()
    T = np.asarray(T, dtype=float)
    constraints = parse_constraints(constraints)
    if len(constraints) != T.ndim:
        raise ValueError(
            f"{len(constraints)} constraints given for an order-{T.ndim} tensor"
        )
    if not np.all(np.isfinite(T)):
        raise ValueError("tensor has non-finite entries")
    active = [k for k, c in enumerate(constraints) if c is not I]
    _check_rank(T, constraints)

    factors = _initial_factors(T.shape, constraints, opts.init)
    Y = apply_inverse(T, factors)
    ell = float(np.linalg.norm(Y))
    if ell == 0.0:
        raise RankDeficiencyError("tensor is identically zero")
    Q = Y / ell
    ell0 = ell
    history = [ell]
    diag = Diagnostics(n_iter=0, converged=False, history=history, options=opts.as_dict())

    if not active:
        diag.converged = True
        diag.core_residuals = check_core(Q, constraints)
        return HolqDecomposition(ell, factors, Q, constraints, diag)

    layout = _layout(T.shape)
    q = vec(Q)
    it = 0
    for it in range(1, opts.max_iter + 1):
        try:
            if opts.variant == "orthogonalized":
                for k in active:
                    q, ell = _orth_update(layout, q, ell, factors, k, constraints[k])
            else:
                for k in active:
                    _plain_update(T, factors, k, constraints[k])
                Y = apply_inverse(T, factors)
                ell = float(np.linalg.norm(Y))
                q = vec(Y) / ell
        except RankDeficiencyError as exc:
            raise NonExistenceError(
                f"HOLQ may not exist: core lost rank at sweep {it} ({exc})"
            ) from exc
        history.append(ell)
        if callback is not None:
            callback(it, [None if L is None else L.copy() for L in factors], ell)

        change = abs(history[-2] - ell) / history[-2]
        done = False
        if change < opts.tol:
            res = layout.residuals(q, constraints)
            done = max(r for r in res if r is not None) < opts.core_tol
        if done or it % 10 == 0 or it == opts.max_iter:
            _check_divergence(factors, ell, ell0, it, opts)
        if done:
            diag.converged = True
            break
    Q = unvec(q, T.shape)
    diag.n_iter = it
    diag.core_residuals = check_core(Q, constraints)
    return HolqDecomposition(ell, factors, Q, constraints, diag)


def _check_divergence(factors, ell, ell0, it, opts):
    cond = _max_cond(factors)
    if not np.isfinite(ell) or cond > opts.blowup_cond or ell < 1e-12 * ell0:
        raise NonExistenceError(
            f"HOLQ may not exist: after {it} sweeps the factor condition number is "
            f"{cond:.3g} and the criterion fell from {ell0:.6g} to {ell:.6g}"
        )


def holq(T, opts=None, callback=None):
    """Incredible HOLQ; the last mode of ``T`` is the sample mode."""
    T = np.asarray(T, dtype=float)
    if T.ndim < 2:
        raise ValueError("holq needs an array of order at least 2")
    return holq_junior(T, [U] * (T.ndim - 1) + [I], opts, callback)


def horq(d):
    """Higher order RQ from a HOLQ: ``L_k = R_k Z_k`` and the ``Z_k`` move into the core."""
    rots = []
    Rs = []
    scale = d.ell
    for L, c in zip(d.factors, d.constraints):
        if c is I:
            rots.append(None)
            Rs.append(None)
            continue
        if c is not U:
            raise ValueError("horq needs unrestricted or identity modes")
        R, Z = rq(L)
        g = np.exp(log_det_tri(R) / R.shape[0])
        Rs.append(R / g)
        rots.append(Z)
        scale *= g
    core = tucker_mult(rots, d.core)
    nrm = float(np.linalg.norm(core))
    return HorqDecomposition(r=float(scale * nrm), factors=Rs, core=core / nrm)
