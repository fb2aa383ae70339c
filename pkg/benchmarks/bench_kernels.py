#!/usr/bin/env python3
"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--tuples N] [--rows R] [--repeat N]

The first numba call compiles (or loads from cache), so it is timed
separately and excluded from the steady-state figure.
"""
import argparse
import time

import numpy as np

from multilink import _kernels
from multilink._accel import HAVE_NUMBA
from multilink.lattice import enumerate_patterns


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def partition_inputs(rng, n_tuples):
    space = enumerate_patterns(3)
    m = int(round(n_tuples ** (1 / 3)))
    sizes = np.array([m, m, m], dtype=np.int64)
    codes = rng.integers(-1, 12, size=3 * m).astype(np.int64)
    offsets = np.array([0, m, 2 * m, 3 * m], dtype=np.int64)
    lin = np.arange(m**3, dtype=np.int64)
    return (codes, offsets, sizes, lin, space.rank_table, space.lex_to_canon), m**3


def em_inputs(rng, rows, fields=6, k=3):
    space = enumerate_patterns(k)
    b = space.size
    gamma = rng.integers(0, b, size=(rows, fields)).astype(np.int64)
    slot = np.zeros(rows, dtype=np.int64)
    adm = np.ascontiguousarray(space.admissible(np.array([space.top])))
    log_s = np.log(rng.dirichlet(np.ones(b)))
    pi = rng.dirichlet(np.ones(b), size=(fields, b)).transpose(0, 2, 1)
    log_pi = np.log(pi)
    clamp = np.full(rows, -1, dtype=np.int64)
    counts = rng.integers(1, 50, size=rows).astype(np.float64)
    return gamma, slot, adm, log_s, log_pi, clamp, counts


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tuples", type=int, default=1_000_000)
    ap.add_argument("--rows", type=int, default=50_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    print(f"numba available: {HAVE_NUMBA} (dispatch backend: {_kernels.BACKEND})")
    if not HAVE_NUMBA:
        print("numba is missing or disabled; only the numpy timings are shown")

    part_args, n = partition_inputs(rng, args.tuples)
    gamma, slot, adm, log_s, log_pi, clamp, counts = em_inputs(rng, args.rows)
    post, _ = _kernels.e_step_np(gamma, slot, adm, log_s, log_pi, clamp)
    cases = [
        (f"partition_indices ({n:,} tuples)", _kernels.partition_indices_nb, _kernels.partition_indices_np,
         part_args),
        (f"e_step ({args.rows:,} rows)", _kernels.e_step_nb, _kernels.e_step_np,
         (gamma, slot, adm, log_s, log_pi, clamp)),
        (f"m_step_stats ({args.rows:,} rows)", _kernels.m_step_stats_nb, _kernels.m_step_stats_np,
         (gamma, counts, post)),
    ]
    print(f"{'kernel':36s} {'numpy s':>10s} {'numba s':>10s} {'first call':>11s} {'speedup':>8s}")
    for name, nb, npf, a in cases:
        t_np = best_of(lambda: npf(*a), args.repeat)
        if HAVE_NUMBA:
            t0 = time.perf_counter()
            nb(*a)
            first = time.perf_counter() - t0
            t_nb = best_of(lambda: nb(*a), args.repeat)
            print(f"{name:36s} {t_np:10.4f} {t_nb:10.4f} {first:11.4f} {t_np / t_nb:7.1f}x")
        else:
            print(f"{name:36s} {t_np:10.4f} {'-':>10s} {'-':>11s} {'-':>8s}")


if __name__ == "__main__":
    main()
