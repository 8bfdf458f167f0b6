"""Compare the compiled and numpy kernel backends.

Run ``python benchmarks/bench_kernels.py [--repeat R] [--threads T]``. Each
kernel is timed on both backends with identical inputs, and the outputs are
checked for agreement before any timing is reported.
"""

import argparse
import time

import numpy as np

from splatfield._kernels import compiled_backend, python_backend


def _inputs(Q, K, d=2, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.random((Q, d))
    mu = rng.random((K, d))
    sigma = 0.6 / np.sqrt(K)
    prec = np.broadcast_to(np.eye(d) / sigma**2, (K, d, d)).copy()
    w = np.full(K, 0.5)
    amp = rng.standard_normal((K, 1))
    return x, mu, prec, w, amp


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(threads):
    x, mu, prec, w, amp = _inputs(20_000, 1024)
    yield "shepard_eval Q=20000 K=1024", lambda b: b.shepard_eval(x, mu, prec, w, amp, 1e-30, threads)[0]
    yield "shepard_weight_sums Q=20000 K=1024", lambda b: b.shepard_weight_sums(x, mu, prec, w, 1e-30, threads)[0]
    yield "moment_sum(1) Q=20000 K=1024", lambda b: b.moment_sum(x, mu, prec, w, 1.0, 1e-30, threads)[0]
    xs, mus, precs, _, _ = _inputs(4096, 256)
    yield "basis_matrix Q=4096 K=256", lambda b: b.basis_matrix(xs, mus, precs, threads)
    pts = np.random.default_rng(1).random((128 * 128, 2))
    anchor = np.array([0.5, 0.5])
    yield "farthest_point_indices P=16384 K=1024", lambda b: b.farthest_point_indices(pts, 1024, anchor)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    if compiled_backend is None:
        print("compiled backend not built; only the numpy fallback is available")
        return 1
    print(f"{'kernel':40s} {'cython s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, run in cases(args.threads):
        tc, oc = _best(lambda: run(compiled_backend), args.repeat)
        tp, op = _best(lambda: run(python_backend), args.repeat)
        if not np.allclose(oc, op, rtol=1e-12, atol=1e-14):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:40s} {tc:10.4f} {tp:10.4f} {tp / tc:8.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
