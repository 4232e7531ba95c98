"""Time the numba kernels against the numpy reference path.

    python benchmarks/bench_kernels.py [--repeat N] [--threads N]

The first numba call includes compilation and is reported separately.
"""

import argparse
import time

import numpy as np

from folverify import kernels
from folverify.kernels import jit, ref
from folverify.localmodel import SQRT2_M1, ModelParams


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(20000, 4, 4))
    M = A - np.swapaxes(A, 1, 2)
    p = ModelParams()
    Z = rng.normal(size=(200000, 4)) * 0.1
    seeds = rng.uniform(0, 2 * np.pi, (256, 2))
    pv = np.array([SQRT2_M1, 0.0, 0.0, 0.0, 0.0, 0.3])
    per = np.array([True, True])

    def flow(mod):
        return lambda: mod.integrate_many(kernels.TORUS_REPARAM, seeds, pv, per, 200.0, 1e-10, 1e-3, 0.5, False,
                                          -1, 0.0, 0.0, 10.0, 10_000_000)

    return {
        "pfaffian_batch 20000x4x4": (lambda: jit.pfaffian_batch(M), lambda: ref.pfaffian_batch(M)),
        "rho_tilde_grad 200000": (lambda: jit.rho_tilde_grad(Z, p.K, p.delta),
                                  lambda: ref.rho_tilde_grad(Z, p.K, p.delta)),
        "integrate_many 256 seeds, t=200": (flow(jit), flow(ref)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=0)
    args = ap.parse_args()
    kernels.set_threads(args.threads or kernels.default_threads())
    print(f"{'kernel':34s} {'compile':>9s} {'numba':>9s} {'numpy':>9s} {'speedup':>8s}")
    for name, (fj, fr) in cases().items():
        t0 = time.perf_counter()
        fj()
        first = time.perf_counter() - t0
        tj, tr = _time(fj, args.repeat), _time(fr, args.repeat)
        print(f"{name:34s} {first:9.3f} {tj:9.4f} {tr:9.4f} {tr / tj:7.1f}x")


if __name__ == "__main__":
    main()
