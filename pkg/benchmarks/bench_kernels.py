"""Compiled kernels versus their NumPy twins.

Run with ``python benchmarks/bench_kernels.py``. Each kernel is timed on both
backends with the same inputs, and the outputs are checked to agree.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from bosonsig import _kernels
from bosonsig.optics import configurations, haar_random_unitary


def _best(fn, number: int, repeat: int = 5) -> float:
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def bench_permanents(backend, n: int, m: int, u: np.ndarray):
    table = configurations(n, m)
    cols = np.arange(n)
    rows = np.asarray(table.modes, dtype=np.int64)
    return (lambda: backend.submatrix_permanents(u, cols, rows)), len(rows)


def bench_tree(backend, X, y):
    sample = np.arange(len(X))
    return lambda: backend.grow_tree(X, y, sample, 2, 3, 12345)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--number", type=int, default=20)
    args = ap.parse_args(argv)
    compiled = _kernels.compiled_backend
    backends = [("python", _kernels.python_backend)]
    if compiled is not None:
        backends.insert(0, ("cython", compiled))
    else:
        print("compiled extension not built; timing the NumPy fallback only")

    rng = np.random.default_rng(0)
    cases = []
    for n, m in ((3, 7), (4, 9), (6, 12)):
        u = haar_random_unitary(m, 1)
        cases.append((f"permanents n={n} m={m}", lambda b, n=n, m=m, u=u: bench_permanents(b, n, m, u)[0]))
    X = rng.normal(size=(2000, 10))
    y = (X[:, 0] + 0.5 * rng.normal(size=2000) > 0).astype(np.int64)
    cases.append(("grow_tree 2000x10", lambda b: bench_tree(b, X, y)))

    print(f"{'kernel':<26}" + "".join(f"{name:>14}" for name, _ in backends) + "   speedup")
    for label, make in cases:
        times = []
        outs = []
        for _, backend in backends:
            fn = make(backend)
            outs.append(fn())
            times.append(_best(fn, args.number))
        if len(outs) == 2:
            a, b = outs
            if isinstance(a, tuple):
                assert all(np.array_equal(p, q) for p, q in zip(a, b)), label
            else:
                assert np.allclose(a, b, rtol=1e-10, atol=1e-12), label
        speed = f"{times[-1] / times[0]:9.1f}x" if len(times) == 2 else ""
        print(f"{label:<26}" + "".join(f"{t * 1e3:11.3f} ms" for t in times) + speed)


if __name__ == "__main__":
    main()
