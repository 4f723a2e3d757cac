"""Compiled vs numpy kernels on desk-scale inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel is timed on identical inputs for every available backend; the
outputs are compared so a speedup never hides a wrong answer.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from fraclevy import _kernels
from fraclevy.chaos import BasisSpec, random_element
from fraclevy.grid import TimeGrid
from fraclevy.levy_models import LevyModel, discretize_measure


def _cases(rng):
    marks = discretize_measure(LevyModel.two_point())
    x = np.ascontiguousarray(rng.standard_normal((1024, 192)))
    q = rng.standard_normal(193)
    yield "causal_convolve 1024x192", lambda k: k.causal_convolve(x, q, 193)

    basis = BasisSpec(TimeGrid(-1.0, 1.0, 10), marks, 6, "separable")
    space = basis.space
    F = random_element(basis, rng, 3, nnz=200)
    G = random_element(basis, rng, 3, nnz=60)
    a = np.ascontiguousarray(np.tile(F.dense(), (16, 1)))
    gv, gw = np.ascontiguousarray(G.coefs), np.ascontiguousarray(G.words)
    yield f"wick_dense 16 rows, size {space.size}", lambda k: k.wick_dense(a, gv, gw, space.succ, space.sentinel)

    args = (np.ascontiguousarray(F.words), np.ascontiguousarray(F.coefs), gw, gv, space.binom, space.offsets, space.sentinel)
    yield f"wick_sparse {F.nnz}x{G.nnz} terms", lambda k: k.wick_sparse(*args)


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None)
    args = ap.parse_args(argv)
    impls = _kernels.implementations()
    if "cython" not in impls:
        print("compiled extension not built; timing the numpy fallback only", file=sys.stderr)
    rng = np.random.default_rng(0)
    rows = []
    print(f"{'kernel':40s} " + " ".join(f"{n:>12s}" for n in impls) + "    speedup")
    for name, fn in _cases(rng):
        ref = fn(impls["python"])
        times = {}
        for backend, mod in impls.items():
            if not _same(fn(mod), ref):
                raise SystemExit(f"{name}: {backend} disagrees with the numpy kernel")
            n = max(1, int(0.2 / max(timeit.timeit(lambda: fn(mod), number=1), 1e-6)))
            times[backend] = min(timeit.repeat(lambda: fn(mod), number=n, repeat=args.repeat)) / n
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:40s} " + " ".join(f"{times[b] * 1e3:10.3f}ms" for b in impls) + f"  {speed:8.1f}x")
        rows.append({"kernel": name, "seconds": times, "speedup": speed})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
