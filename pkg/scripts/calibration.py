"""Monte Carlo calibration of the likelihood ratio test.

Draws datasets under the null hypothesis, runs the Monte Carlo test on each
and reports the rejection rate at several levels.

    python scripts/calibration.py --shape 2,3,4 --h0 dui --h1 uui --outer 500 --nsim 199
"""

import argparse
import json
import time

import numpy as np

from holq.inference import HypothesisSpec, lrt_test, sample_multilinear_normal


def null_parameters(h0, rng):
    """Random parameters obeying the constraints of ``h0`` on each mode."""
    sigmas = []
    for p, c in zip(h0.model_shape[:-1], h0.constraints[:-1]):
        c = str(c)
        if c == "i":
            sigmas.append(np.eye(p))
            continue
        L = np.tril(rng.standard_normal((p, p)) * 0.5, -1)
        if c == "d":
            S = np.diag(np.exp(rng.uniform(-1, 1, p)))
        elif c == "c":
            S = (L + np.eye(p)) @ (L + np.eye(p)).T
        else:
            L += np.diag(np.exp(rng.uniform(-1, 1, p)))
            S = L @ L.T
        sigmas.append(S)
    return float(np.exp(rng.uniform(-1, 1))), sigmas


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shape", default="2,3,4")
    ap.add_argument("--h0", default="dui")
    ap.add_argument("--h1", default="uui")
    ap.add_argument("--outer", type=int, default=500)
    ap.add_argument("--nsim", type=int, default=199)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    shape = tuple(int(s) for s in args.shape.split(","))
    h0 = HypothesisSpec.parse(args.h0, shape)
    h1 = HypothesisSpec.parse(args.h1, shape)
    if h0.permutation != tuple(range(len(shape))) or h0.model_shape != shape:
        raise SystemExit("calibration.py only handles null hypotheses without merged modes")
    sigma2, sigmas = null_parameters(h0, np.random.default_rng(args.seed))

    t0 = time.perf_counter()
    p_values = np.empty(args.outer)
    for i in range(args.outer):
        X = sample_multilinear_normal(sigma2, sigmas, shape[-1],
                                      np.random.SeedSequence(args.seed, spawn_key=(1, i)))
        res = lrt_test(X, h0, h1, nsim=args.nsim, seed=args.seed + 1 + i, n_jobs=args.threads)
        p_values[i] = res.p_value
    levels = (0.01, 0.05, 0.10)
    out = {
        "shape": list(shape), "h0": str(h0), "h1": str(h1),
        "outer": args.outer, "nsim": args.nsim, "seed": args.seed,
        "rejection_rate": {str(a): float(np.mean(p_values <= a)) for a in levels},
        "seconds": round(time.perf_counter() - t0, 1),
    }
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
