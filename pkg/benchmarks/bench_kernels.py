"""Time the numba and numpy box kernels on realistic and large matrix sizes.

    python benchmarks/bench_kernels.py [--repeat N]

Real tables have tens of words and a handful of columns, where call overhead
dominates; the large sizes show the asymptotic difference. The end-to-end row
runs parse+filter+build over a synthetic corpus under each setting of
CHITAB_NO_NUMBA in a fresh interpreter.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from chitab import _kernels


def random_boxes(rng, n, scale=500.0):
    xy = rng.uniform(0, scale, size=(n, 2))
    wh = rng.uniform(1, 60, size=(n, 2))
    return np.hstack([xy, xy + wh])


def bench_pair(name, fn_np, fn_nb, a, b, repeat):
    t_np = min(timeit.repeat(lambda: fn_np(a, b), number=20, repeat=repeat)) / 20
    row = f"{name:<28}{a.shape[0]:>6} x {b.shape[0]:<6}{t_np * 1e6:>12.1f}"
    if fn_nb is not None:
        fn_nb(a, b)
        t_nb = min(timeit.repeat(lambda: fn_nb(a, b), number=20, repeat=repeat)) / 20
        assert np.array_equal(fn_np(a, b), fn_nb(a, b), equal_nan=fn_np is _kernels.hcover_matrix_numpy)
        row += f"{t_nb * 1e6:>12.1f}{t_np / t_nb:>9.1f}x"
    print(row)


END_TO_END = """
import sys, tempfile, time
from pathlib import Path
from chitab.complexity import FilterConfig
from chitab.pipeline import discover, process_table
from chitab.synth import write_corpus
with tempfile.TemporaryDirectory() as d:
    write_corpus(d, 1500, seed=1, flat_fraction=0.5)
    tasks = discover(Path(d) / "structure", Path(d) / "words")
    cfg = FilterConfig()
    process_table(tasks[0], cfg)
    t0 = time.perf_counter()
    for t in tasks:
        process_table(t, cfg)
    print(f"{1000 * (time.perf_counter() - t0) / len(tasks):.3f}")
"""


def end_to_end(no_numba):
    env = dict(os.environ, CHITAB_NO_NUMBA="1" if no_numba else "0")
    out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    has = _kernels.HAS_NUMBA
    print(f"numba available: {has}")
    print(f"{'kernel':<28}{'shape':>15}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for n, m in [(40, 12), (300, 40), (2000, 500)]:
        a, b = random_boxes(rng, n), random_boxes(rng, m)
        bench_pair("intersect (words x elems)", _kernels.intersect_matrix_numpy,
                   _kernels.intersect_matrix_numba if has else None, a, b, args.repeat)
        bench_pair("hcover (cells x columns)", _kernels.hcover_matrix_numpy,
                   _kernels.hcover_matrix_numba if has else None, a, b, args.repeat)
    print(f"end-to-end ms/table  numpy: {end_to_end(True):.3f}", end="")
    print(f"  numba: {end_to_end(False):.3f}" if has else "")


if __name__ == "__main__":
    main()
