"""Compare the compiled and numpy WLS kernels on batches shaped like real stencils.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from wlseno import kernels

# (label, stencil rows, coefficients, batch size)
CASES = [
    ("1-D degree 4", 7, 5, 20000),
    ("2-D degree 2", 12, 6, 20000),
    ("2-D degree 3", 18, 10, 10000),
    ("3-D degree 3", 32, 20, 2000),
]


def make_batch(rows: int, cols: int, batch: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(batch, rows, cols))
    w = rng.uniform(0.01, 100.0, (batch, rows))
    rhs = rng.normal(size=(batch, rows, 1))
    return A, np.arange(batch, dtype=np.int64), w, rhs


def best_time(backend: str, args, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        kernels.wls_solve(*args, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    opts = ap.parse_args()
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'case':<14}{'batch':>8}" + "".join(f"{b + ' [ms]':>16}" for b in backends) + f"{'speedup':>10}")
    for label, rows, cols, batch in CASES:
        args = make_batch(rows, cols, batch)
        times = {b: best_time(b, args, opts.repeat) for b in backends}
        speed = times["numpy"] / times["cython"] if "cython" in times else float("nan")
        cells = "".join(f"{1e3 * times[b]:>16.1f}" for b in backends)
        print(f"{label:<14}{batch:>8}{cells}{speed:>10.2f}")


if __name__ == "__main__":
    main()
