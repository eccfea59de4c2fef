"""Likelihood inference for separable covariance models.

Under ``vec(X) ~ N(0, sigma^2 Sigma_K kron ... kron Sigma_1)`` the MLEs come
straight from a HOLQ junior ``X = ell (L_1, ..., L_K) . Q``:
``Sigma_k = L_k L_k^T`` and ``sigma^2 = ell^2 / N`` with ``N`` the number of
entries.  For nested hypotheses the likelihood ratio test rejects for large
``ell_0 / ell_1``, whose null distribution is free of the parameters, so it
can be simulated from i.i.d. standard normal arrays.
"""

from __future__ import annotations

import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import (
    HolqDecomposition,
    HolqError,
    ModeConstraint,
    SolverOptions,
    holq_junior,
    parse_constraints,
)
from .linalg import RankDeficiencyError, cholesky
from .tensor import tucker_mult

__all__ = [
    "HypothesisSpec",
    "MleResult",
    "LrtResult",
    "MLE_OPTIONS",
    "LRT_OPTIONS",
    "GENERATOR",
    "mle",
    "is_nested",
    "lrt_fit",
    "lrt_statistic",
    "lrt_null_sample",
    "lrt_test",
    "monte_carlo_p_value",
    "sample_multilinear_normal",
    "replicate_rng",
    "default_jobs",
]

# Likelihoods of small samples can be very flat, where block coordinate
# descent needs tens of thousands of sweeps and the distance to the fixed
# point is far larger than the core residual; both settings reflect that.
MLE_OPTIONS = SolverOptions(core_tol=1e-11, max_iter=100000)
# Looser than the solver default: the statistic only needs ~1e-8 relative accuracy.
LRT_OPTIONS = SolverOptions(tol=1e-9, core_tol=1e-6, max_iter=5000)
GENERATOR = "numpy PCG64, SeedSequence(seed, spawn_key=(i,)) for replicate i"
MAX_FAILURE_RATE = 0.01

_U, _D, _C, _I = (
    ModeConstraint.UNRESTRICTED,
    ModeConstraint.DIAGONAL,
    ModeConstraint.UNIT_DIAG_CHOLESKY,
    ModeConstraint.IDENTITY,
)


def replicate_rng(seed, i):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(i),)))


def default_jobs():
    try:
        return max(1, int(os.environ.get("HOLQ_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class HypothesisSpec:
    """A separable covariance submodel for arrays of shape ``shape``.

    ``groups[m]`` lists the observed modes that are merged (first one varying
    fastest) into model mode ``m``; ``constraints[m]`` is its covariance
    class.  Without ``groups`` every observed mode is its own model mode.
    """

    shape: tuple
    constraints: tuple
    groups: tuple = None

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        constraints = tuple(parse_constraints(self.constraints))
        groups = self.groups
        if groups is None:
            groups = tuple((k,) for k in range(len(shape)))
        groups = tuple(tuple(int(j) for j in g) for g in groups)
        flat = [j for g in groups for j in g]
        if sorted(flat) != list(range(len(shape))) or any(len(g) == 0 for g in groups):
            raise ValueError(f"groups {groups} are not a partition of the modes of {shape}")
        if len(constraints) != len(groups):
            raise ValueError(
                f"{len(constraints)} constraints for {len(groups)} model modes"
            )
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "constraints", constraints)
        object.__setattr__(self, "groups", groups)

    @property
    def model_shape(self):
        return tuple(int(np.prod([self.shape[j] for j in g])) for g in self.groups)

    @property
    def permutation(self):
        return tuple(j for g in self.groups for j in g)

    def apply(self, T):
        """Reshape an observed array into the model's modes."""
        T = np.asarray(T, dtype=float)
        if T.shape != self.shape:
            raise ValueError(f"array of shape {T.shape} does not match hypothesis shape {self.shape}")
        perm = self.permutation
        if perm != tuple(range(T.ndim)):
            T = np.transpose(T, perm)
        return np.reshape(T, self.model_shape, order="F")

    @classmethod
    def parse(cls, text, shape):
        """Parse the constraint mini-language.

        One letter (``u``, ``d``, ``c``, ``i``) per observed mode, taken in
        order; ``(jk)x`` merges the 1-based observed modes ``j, k`` (which must
        come next) into one mode with constraint ``x``.  Modes may be written
        ``(1,2)`` when there are more than nine.  Whitespace is ignored.
        """
        tokens = re.findall(r"\(([\d,\s]+)\)\s*([A-Za-z])|([A-Za-z])|(\S)", text)
        constraints, groups = [], []
        nxt = 0
        for grp, letter_g, letter, bad in tokens:
            if bad:
                raise ValueError(f"unexpected character {bad!r} in hypothesis {text!r}")
            if grp:
                if "," in grp:
                    modes = [int(x) - 1 for x in grp.split(",") if x.strip()]
                else:
                    modes = [int(ch) - 1 for ch in grp if not ch.isspace()]
                if modes != list(range(nxt, nxt + len(modes))):
                    raise ValueError(
                        f"merged modes {[m + 1 for m in modes]} must be the next "
                        f"consecutive modes starting at {nxt + 1}"
                    )
                groups.append(tuple(modes))
                constraints.append(letter_g)
                nxt += len(modes)
            else:
                groups.append((nxt,))
                constraints.append(letter)
                nxt += 1
        if nxt != len(shape):
            raise ValueError(
                f"hypothesis {text!r} covers {nxt} modes but the data has {len(shape)}"
            )
        return cls(tuple(shape), tuple(parse_constraints("".join(constraints))), tuple(groups))

    def __str__(self):
        parts = []
        for g, c in zip(self.groups, self.constraints):
            if len(g) == 1:
                parts.append(c.value)
            else:
                sep = "," if max(g) >= 9 else ""
                parts.append("(" + sep.join(str(j + 1) for j in g) + ")" + c.value)
        return " ".join(parts)


@dataclass
class MleResult:
    sigma2_hat: float
    sigma_hats: list
    max_loglik: float
    decomposition: HolqDecomposition

    @property
    def converged(self):
        return self.decomposition.converged


@dataclass
class LrtResult:
    stat: float
    log_lr: float
    p_value: float
    nsim: int
    seed: int
    n_failed: int
    null_quantiles: dict
    h0: str
    h1: str
    options: dict = field(default_factory=dict)
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)
    generator: str = GENERATOR

    def as_dict(self):
        return {
            "stat": self.stat,
            "log_lr": self.log_lr,
            "p_value": self.p_value,
            "nsim": self.nsim,
            "seed": self.seed,
            "n_failed": self.n_failed,
            "null_quantiles": dict(self.null_quantiles),
            "h0": self.h0,
            "h1": self.h1,
            "options": dict(self.options),
            "converged": self.converged,
            "diagnostics": dict(self.diagnostics),
            "generator": self.generator,
        }


def mle(T, constraints, opts=None):
    """MLEs of ``(sigma^2, Sigma_1, ..., Sigma_K)`` from the HOLQ junior of ``T``."""
    T = np.asarray(T, dtype=float)
    d = holq_junior(T, constraints, opts or MLE_OPTIONS)
    N = T.size
    sigma2 = d.ell ** 2 / N
    sigmas = [np.eye(p) if L is None else L @ L.T for p, L in zip(T.shape, d.factors)]
    loglik = -0.5 * N * np.log(2 * np.pi * sigma2) - 0.5 * N
    return MleResult(sigma2_hat=float(sigma2), sigma_hats=sigmas, max_loglik=float(loglik), decomposition=d)


_CONTAINS = {
    _U: {_U, _D, _C, _I},
    _D: {_D, _I},
    _C: {_C, _I},
    _I: {_I},
}


def is_nested(h0, h1):
    """Structural check that ``h0`` is a submodel of ``h1``.

    Covers same-layout specs (constraint containment mode by mode) and specs
    where each ``h1`` mode merges consecutive ``h0`` modes.
    """
    if h0.shape != h1.shape or h0.permutation != h1.permutation:
        return False
    i = 0
    for g1, c1 in zip(h1.groups, h1.constraints):
        members = []
        covered = ()
        while len(covered) < len(g1) and i < len(h0.groups):
            covered += h0.groups[i]
            members.append(h0.constraints[i])
            i += 1
        if covered != g1:
            return False
        if not set(members) <= _CONTAINS[c1]:
            return False
    return i == len(h0.groups)


def _check_pair(h0, h1, assume_nested):
    if h0.shape != h1.shape:
        raise ValueError("hypotheses are for arrays of different shapes")
    if not assume_nested and not is_nested(h0, h1):
        raise ValueError(
            f"cannot verify that {h0} is nested in {h1}; pass assume_nested=True to override"
        )


def lrt_fit(T, h0, h1, opts=None, assume_nested=False):
    """Fit both hypotheses; returns ``(stat, log_lr, fit0, fit1)``."""
    _check_pair(h0, h1, assume_nested)
    opts = opts or LRT_OPTIONS
    T = np.asarray(T, dtype=float)
    d0 = holq_junior(h0.apply(T), h0.constraints, opts)
    d1 = d0 if h0 == h1 else holq_junior(h1.apply(T), h1.constraints, opts)
    a0, a1 = d0.ell, d1.ell
    return a0 / a1, T.size * (2 * np.log(a0) - 2 * np.log(a1)), d0, d1


def lrt_statistic(T, h0, h1, opts=None, assume_nested=False):
    """``(ell_0 / ell_1, N (log ell_0^2 - log ell_1^2))`` for ``h0`` against ``h1``."""
    stat, log_lr, _, _ = lrt_fit(T, h0, h1, opts, assume_nested)
    return stat, log_lr


def _null_chunk(args):
    h0, h1, seed, start, stop, opts = args
    out = np.empty(stop - start)
    for j, i in enumerate(range(start, stop)):
        x = replicate_rng(seed, i).standard_normal(int(np.prod(h0.shape)))
        X = np.reshape(x, h0.shape, order="F")
        try:
            stat, _, d0, d1 = lrt_fit(X, h0, h1, opts, assume_nested=True)
        except (HolqError, RankDeficiencyError):
            stat = np.nan
        else:
            if not (d0.converged and d1.converged):
                stat = np.nan
        out[j] = stat
    return out


def lrt_null_sample(h0, h1, nsim, seed, opts=None, n_jobs=None, assume_nested=False):
    """``nsim`` draws of ``ell_0 / ell_1`` under ``h0``.

    Replicate ``i`` is computed from its own substream of ``seed``, so the
    output does not depend on ``n_jobs``.  Failed replicates are NaN; more
    than 1% failures raises ``RuntimeError``.
    """
    _check_pair(h0, h1, assume_nested)
    nsim = int(nsim)
    if nsim < 0:
        raise ValueError("nsim must be non-negative")
    if nsim == 0:
        return np.empty(0)
    opts = opts or LRT_OPTIONS
    n_jobs = default_jobs() if n_jobs is None else max(1, int(n_jobs))
    if n_jobs == 1:
        stats = _null_chunk((h0, h1, seed, 0, nsim, opts))
    else:
        bounds = np.linspace(0, nsim, min(nsim, 4 * n_jobs) + 1).astype(int)
        tasks = [(h0, h1, seed, a, b, opts) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            stats = np.concatenate(list(ex.map(_null_chunk, tasks)))
    n_failed = int(np.isnan(stats).sum())
    if n_failed > MAX_FAILURE_RATE * nsim:
        raise RuntimeError(
            f"{n_failed} of {nsim} null replicates failed to converge or do not exist"
        )
    return stats


def monte_carlo_p_value(observed, null_stats):
    """``(1 + #{null >= observed}) / (n + 1)`` over the finite null draws."""
    null_stats = np.sort(np.asarray(null_stats, dtype=float))
    null_stats = null_stats[np.isfinite(null_stats)]
    count = null_stats.size - np.searchsorted(null_stats, observed, side="left")
    return (1 + int(count)) / (null_stats.size + 1)


def lrt_test(T, h0, h1, nsim, seed, opts=None, n_jobs=None, assume_nested=False):
    """Monte Carlo likelihood ratio test of ``h0`` against ``h1``."""
    opts = opts or LRT_OPTIONS
    stat, log_lr, d0, d1 = lrt_fit(T, h0, h1, opts, assume_nested)
    null = lrt_null_sample(h0, h1, nsim, seed, opts, n_jobs, assume_nested=True)
    finite = null[np.isfinite(null)]
    qs = (0.5, 0.9, 0.95, 0.99)
    quantiles = {str(q): float(np.quantile(finite, q)) for q in qs} if finite.size else {}
    return LrtResult(
        stat=float(stat),
        log_lr=float(log_lr),
        p_value=monte_carlo_p_value(stat, null),
        nsim=int(nsim),
        seed=int(seed),
        n_failed=int(null.size - finite.size),
        null_quantiles=quantiles,
        h0=str(h0),
        h1=str(h1),
        options=opts.as_dict(),
        converged=bool(d0.converged and d1.converged),
        diagnostics={"h0": d0.diagnostics.as_dict(), "h1": d1.diagnostics.as_dict()},
    )


def sample_multilinear_normal(sigma2, sigmas, n, seed):
    """Draw ``sigma (chol S_1, ..., chol S_K, I_n) . Z`` with i.i.d. normal ``Z``.

    ``Z`` is filled in vec order from ``np.random.default_rng(seed)`` (or
    from ``seed`` itself when it is a ``Generator``).
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    chols = [cholesky(S) for S in sigmas]
    shape = tuple(L.shape[0] for L in chols) + (int(n),)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    Z = np.reshape(rng.standard_normal(int(np.prod(shape))), shape, order="F")
    return np.sqrt(sigma2) * tucker_mult(chols + [None], Z)
