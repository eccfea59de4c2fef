"""Regenerate the CLI golden files in tests/data.

Run after an intentional change to the result schema:

    python scripts/make_golden.py
"""

import os
from pathlib import Path

import numpy as np

from holq.cli import run
from holq.tensor import write_tensor

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"

CASES = {
    "holq": ["holq", "small.tsr", "--tol", "1e-10"],
    "junior": ["junior", "small.tsr", "--constraints", "dci"],
    "mle": ["mle", "small.tsr", "--constraints", "uui"],
    "lrt": ["lrt", "small.tsr", "--h0", "dd i", "--h1", "uu i", "--nsim", "99", "--seed", "7"],
}


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    T = np.random.default_rng(20240601).standard_normal((3, 4, 10))
    write_tensor(DATA / "small.tsr", T)
    # run from the data directory so the recorded input path is relative
    os.chdir(DATA)
    for name, argv in CASES.items():
        out = f"{name}.golden.json"
        code = run(argv + ["-o", out])
        print(f"{name}: exit {code} -> {out}")


if __name__ == "__main__":
    main()
