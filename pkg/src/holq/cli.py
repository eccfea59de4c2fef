"""Command-line front end: ``holq <command> [options]``.

Every command reads a tensor in the text format of :mod:`holq.tensor` and
writes one result document (JSON by default).  Exit status is 0 on success,
2 when a solver stopped before converging (the result is still written and
carries ``"converged": false``) and 1 on bad input, bad usage, or when the
decomposition does not exist.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .engine import SolverOptions, holq, holq_junior, horq, parse_constraints
from .ihop import ihop
from .inference import (
    GENERATOR,
    LRT_OPTIONS,
    MLE_OPTIONS,
    HypothesisSpec,
    default_jobs,
    lrt_test,
    mle,
    sample_multilinear_normal,
)
from .spectral import isvd_from_holq, truncated_isvd
from .tensor import format_tensor, read_tensor, vec, write_tensor

COMMANDS = ("holq", "junior", "horq", "isvd", "tisvd", "ihop", "mle", "lrt", "simulate")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- serialization -----------------------------------------------------------


def _num(x):
    x = float(x)
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _is_scalar(x):
    return x is None or isinstance(x, (bool, int, float, str, np.generic))


def to_json(obj, indent=0):
    """JSON text with every float written to 17 significant digits.

    Non-finite floats become ``null``.  Lists of scalars stay on one line,
    so matrices print one row per line.
    """
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if all(_is_scalar(v) for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        items = [inner + to_json(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _matrix(M):
    return None if M is None else np.asarray(M).tolist()


def _matrices(Ms):
    return [_matrix(M) for M in Ms]


def _vectors(vs):
    return [None if v is None else np.asarray(v).tolist() for v in vs]


def to_text(doc):
    """Human-readable rendering; matrices get aligned columns."""
    lines = []

    def emit(key, val, depth):
        pad = "  " * depth
        if isinstance(val, dict):
            lines.append(f"{pad}{key}:")
            for k, v in val.items():
                emit(k, v, depth + 1)
        elif isinstance(val, list) and val and all(isinstance(r, list) for r in val) \
                and all(_is_scalar(x) for r in val for x in r):
            lines.append(f"{pad}{key}:")
            cells = [[_num(x) if isinstance(x, float) else str(x) for x in r] for r in val]
            width = max((len(c) for r in cells for c in r), default=0)
            for r in cells:
                lines.append(pad + "  " + " ".join(c.rjust(width) for c in r))
        elif isinstance(val, list) and not all(_is_scalar(v) for v in val):
            lines.append(f"{pad}{key}:")
            for i, v in enumerate(val):
                emit(f"[{i}]", v, depth + 1)
        else:
            lines.append(f"{pad}{key}: {to_json(val)}")

    for k, v in doc.items():
        emit(k, v, 0)
    return "\n".join(lines) + "\n"


# -- argument handling -------------------------------------------------------


def _solver_args(p, tol_default):
    g = p.add_argument_group("solver")
    g.add_argument("--tol", type=float, default=tol_default,
                   help="relative change in the scale that stops the iteration")
    g.add_argument("--core-tol", type=float, default=None,
                   help="bound on the core structure residual at exit")
    g.add_argument("--max-iter", type=int, default=None,
                   help="sweep cap (default 500; 100000 for mle, 5000 for lrt)")
    g.add_argument("--variant", choices=("orthogonalized", "plain"), default="orthogonalized")


def _output_args(p, formats=("json", "text")):
    p.add_argument("-o", "--output", help="write the result here instead of stdout")
    p.add_argument("--format", choices=formats, default=formats[0])


def _core_arg(p):
    p.add_argument("--core", metavar="PATH", help="write the core tensor to PATH")


def build_parser():
    parser = _Parser(prog="holq", description="HOLQ-family tensor decompositions and "
                     "likelihood inference for separable covariance models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name, help_, tol=SolverOptions.tol):
        p = sub.add_parser(name, help=help_)
        if name != "simulate":
            p.add_argument("input", help="tensor file")
            _solver_args(p, tol)
            _output_args(p)
        return p

    _core_arg(add("holq", "HOLQ; the last mode holds the samples"))
    p = add("junior", "HOLQ junior with per-mode constraints")
    p.add_argument("--constraints", required=True, help="one of u/d/c/i per mode, e.g. 'udi'")
    _core_arg(p)
    _core_arg(add("horq", "HORQ (upper triangular factors)"))
    _core_arg(add("isvd", "ISVD"))
    p = add("tisvd", "truncated ISVD via HOOI")
    p.add_argument("--ranks", required=True, help="comma separated ranks of the non-sample modes")
    _core_arg(p)
    _core_arg(add("ihop", "IHOP (positive definite factors)"))
    p = add("mle", "maximum likelihood estimates under a separable covariance model")
    p.add_argument("--constraints", required=True, help="one of u/d/c/i per mode, e.g. 'uui'")
    p = add("lrt", "Monte Carlo likelihood ratio test of nested hypotheses", tol=LRT_OPTIONS.tol)
    p.add_argument("--h0", required=True, help="null hypothesis, e.g. 'dd i' or '(12)u i'")
    p.add_argument("--h1", required=True, help="alternative hypothesis")
    p.add_argument("--nsim", type=int, default=999)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: $HOLQ_THREADS or 1)")
    p.add_argument("--assume-nested", action="store_true",
                   help="skip the structural nesting check")

    p = add("simulate", "draw from a multilinear normal model")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--cov", action="append", metavar="PATH",
                   help="covariance matrix file for the next mode (repeat per mode)")
    g.add_argument("--dims", help="comma separated mode sizes, identity covariances")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("-n", "--n", type=int, required=True, help="number of samples")
    p.add_argument("--seed", type=int, default=0)
    _output_args(p, formats=("tensor", "json"))
    return parser


def _options(args, base):
    kw = {"tol": args.tol, "variant": args.variant}
    kw["max_iter"] = base.max_iter if args.max_iter is None else args.max_iter
    kw["core_tol"] = base.core_tol if args.core_tol is None else args.core_tol
    return SolverOptions(**kw)


def _ranks(text, order):
    try:
        ranks = [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise UsageError(f"ranks must be comma separated integers, got {text!r}") from None
    if len(ranks) != order - 1:
        raise UsageError(f"need {order - 1} ranks for an order {order} tensor, got {len(ranks)}")
    return ranks


def _constraints(text, order):
    cons = parse_constraints(text)
    if len(cons) != order:
        raise UsageError(
            f"constraint string {text!r} has {len(cons)} letters for an order {order} tensor"
        )
    return cons


def _core_doc(core, args):
    if getattr(args, "core", None):
        write_tensor(args.core, core)
        return {"path": args.core, "shape": list(core.shape)}
    return {"shape": list(core.shape), "data": vec(core)}


# -- commands ----------------------------------------------------------------


def _cmd_holq(T, args, opts):
    d = holq(T, opts)
    return d.converged, {
        "ell": d.ell,
        "factors": _matrices(d.factors),
        "core": _core_doc(d.core, args),
        "diagnostics": d.diagnostics.as_dict(),
    }


def _cmd_junior(T, args, opts):
    cons = _constraints(args.constraints, T.ndim)
    d = holq_junior(T, cons, opts)
    return d.converged, {
        "constraints": "".join(c.value for c in cons),
        "ell": d.ell,
        "factors": _matrices(d.factors),
        "core": _core_doc(d.core, args),
        "diagnostics": d.diagnostics.as_dict(),
    }


def _cmd_horq(T, args, opts):
    d = holq(T, opts)
    h = horq(d)
    return d.converged, {
        "r": h.r,
        "factors": _matrices(h.factors),
        "core": _core_doc(h.core, args),
        "diagnostics": d.diagnostics.as_dict(),
    }


def _cmd_isvd(T, args, opts):
    d = holq(T, opts)
    s = isvd_from_holq(d)
    return d.converged, {
        "ell": s.ell,
        "U": _matrices(s.U),
        "D": _vectors(s.D),
        "core": _core_doc(s.core, args),
        "diagnostics": d.diagnostics.as_dict(),
    }


def _cmd_tisvd(T, args, opts):
    ranks = _ranks(args.ranks, T.ndim)
    t = truncated_isvd(T, ranks, opts)
    d = t.diagnostics
    return d.converged, {
        "ranks": list(t.ranks),
        "ell": t.ell,
        "U": _matrices(t.U),
        "D": _vectors(t.D),
        "core": _core_doc(t.core, args),
        "residual": t.residual,
        "hooi": {"residual": t.hooi.residual, "n_iter": t.hooi.n_iter},
        "diagnostics": d.as_dict(),
    }


def _cmd_ihop(T, args, opts):
    d = ihop(T, opts)
    return d.converged, {
        "ell": d.ell,
        "P": _matrices(d.P),
        "core": _core_doc(d.core, args),
        "criterion": d.criterion,
        "diagnostics": d.diagnostics.as_dict(),
    }


def _cmd_mle(T, args, opts):
    cons = _constraints(args.constraints, T.ndim)
    m = mle(T, cons, opts)
    return m.converged, {
        "constraints": "".join(c.value for c in cons),
        "n_entries": int(T.size),
        "sigma2_hat": m.sigma2_hat,
        "sigma_hats": _matrices(m.sigma_hats),
        "max_loglik": m.max_loglik,
        "diagnostics": m.decomposition.diagnostics.as_dict(),
    }


def _cmd_lrt(T, args, opts):
    try:
        h0 = HypothesisSpec.parse(args.h0, T.shape)
        h1 = HypothesisSpec.parse(args.h1, T.shape)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    threads = default_jobs() if args.threads is None else args.threads
    if threads < 1:
        raise UsageError("--threads must be at least 1")
    r = lrt_test(T, h0, h1, args.nsim, args.seed, opts, n_jobs=threads,
                 assume_nested=args.assume_nested)
    doc = r.as_dict()
    doc["threads"] = threads
    return r.converged, doc


HANDLERS = {
    "holq": _cmd_holq,
    "junior": _cmd_junior,
    "horq": _cmd_horq,
    "isvd": _cmd_isvd,
    "tisvd": _cmd_tisvd,
    "ihop": _cmd_ihop,
    "mle": _cmd_mle,
    "lrt": _cmd_lrt,
}


def _simulate(args):
    if args.cov:
        sigmas = [read_tensor(path) for path in args.cov]
        for path, S in zip(args.cov, sigmas):
            if S.ndim != 2 or S.shape[0] != S.shape[1]:
                raise UsageError(f"{path}: covariance must be a square matrix, got shape {S.shape}")
    else:
        try:
            dims = [int(x) for x in args.dims.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"--dims must be comma separated integers, got {args.dims!r}") from None
        sigmas = [np.eye(p) for p in dims]
    if args.n < 1:
        raise UsageError("-n must be at least 1")
    X = sample_multilinear_normal(args.sigma2, sigmas, args.n, args.seed)
    if args.format == "tensor":
        return format_tensor(X)
    doc = {
        "command": "simulate",
        "version": __version__,
        "seed": args.seed,
        "generator": "numpy PCG64 via default_rng(seed), vec order",
        "sigma2": args.sigma2,
        "sigmas": _matrices(sigmas),
        "n": args.n,
        "tensor": {"shape": list(X.shape), "data": vec(X)},
    }
    return to_json(doc) + "\n"


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv=None):
    """Run the CLI; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help and --version exit 0, usage errors exit 1
        return exc.code if isinstance(exc.code, int) else 1
    try:
        if args.command == "simulate":
            _emit(_simulate(args), args.output)
            return 0
        T = read_tensor(args.input)
        base = {"lrt": LRT_OPTIONS, "mle": MLE_OPTIONS}.get(args.command, SolverOptions())
        opts = _options(args, base)
        converged, result = HANDLERS[args.command](T, args, opts)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"holq: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError, np.linalg.LinAlgError) as exc:
        # HolqError is a RuntimeError; TensorFormatError is a ValueError
        kind = type(exc).__name__
        print(f"holq: error: {kind}: {exc}", file=sys.stderr)
        return 1

    doc = {
        "command": args.command,
        "version": __version__,
        "input": args.input,
        "shape": list(T.shape),
        "seed": getattr(args, "seed", None),
        "generator": GENERATOR if args.command == "lrt" else None,
        "options": opts.as_dict(),
        "converged": bool(converged),
        "result": result,
    }
    text = to_json(doc) + "\n" if args.format == "json" else to_text(doc)
    _emit(text, args.output)
    if not converged:
        print(f"holq: warning: {args.command} did not converge in {opts.max_iter} sweeps",
              file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
