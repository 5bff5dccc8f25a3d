#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the numpy fallback.

Runs the three hot kernels (elementwise exp2, elementwise gelu, batched
softmax rows) plus the tiled matmul on representative shapes and prints a
compiled/numpy/scalar comparison table.  The scalar column times the pure
Python definitional path on a reduced size and scales it, so treat it as
an order-of-magnitude figure.
"""

import argparse
import time

import numpy as np

from swinfx import approx, fxp, mmu, nonlinear
from swinfx import _corepy
from swinfx.approx import DEFAULT_TABLE as T

try:
    from swinfx import _corefast
except ImportError:
    _corefast = None


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--rows", type=int, default=20000,
                    help="softmax batch rows (n = 49 each)")
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    raws = np.arange(-32768, 32768, dtype=np.int16)
    rows = fxp.from_real_arr(rng.uniform(-8, 8, size=(args.rows, 49)))
    a = rng.integers(-2048, 2048, size=(49, 96), dtype=np.int16)
    b = rng.integers(-2048, 2048, size=(96, 32), dtype=np.int16)

    backends = [("numpy", _corepy)]
    if _corefast is not None:
        backends.insert(0, ("compiled", _corefast))

    scalar_slice = raws[:4096]
    scalar_rows = rows[:200]

    cases = [
        ("exp2 (65536 elems)",
         lambda k: k.exp2_i16(raws, T.k, T.b),
         lambda: [approx.exp2(int(x)) for x in scalar_slice],
         65536 / 4096),
        ("gelu (65536 elems)",
         lambda k: k.gelu_i16(raws, T.k, T.b),
         lambda: [nonlinear.gelu(int(x)) for x in scalar_slice],
         65536 / 4096),
        (f"softmax ({args.rows} rows x 49)",
         lambda k: k.softmax_rows_i16(rows, T.k, T.b),
         lambda: [nonlinear.softmax_row(r) for r in scalar_rows],
         args.rows / 200),
    ]

    width = max(len(c[0]) for c in cases) + 2
    header = f"{'kernel':<{width}}" + "".join(f"{n:>12}" for n, _ in backends)
    header += f"{'scalar~':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, batch_fn, scalar_fn, scale in cases:
        times = [timeit(lambda k=kmod: batch_fn(k), args.repeat)
                 for _, kmod in backends]
        t_scalar = timeit(scalar_fn, max(1, args.repeat // 2)) * scale
        ratio = times[-1] / times[0] if len(times) > 1 else 1.0
        row = f"{name:<{width}}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        row += f"{t_scalar * 1e3:>10.2f}ms{ratio:>9.1f}x"
        print(row)

    t_mm = timeit(lambda: mmu.matmul_tiled(a, b, mmu.TileConfig()), args.repeat)
    print(f"\ntiled matmul 49x96 by 96x32 (numpy tile loop): {t_mm * 1e3:.3f} ms")
    if _corefast is None:
        print("compiled core not built; numpy fallback only")


if __name__ == "__main__":
    main()
