"""Time the numba kernels against the numpy fallbacks and check they agree.

    python3 benchmarks/bench_kernels.py [--n 20000] [--repeat 5]
"""
import argparse
import time

import numpy as np

from factforge import _kernels as K


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=20000, help="strings to hash")
    ap.add_argument("--queries", type=int, default=2000)
    ap.add_argument("--entities", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    ids = [f"{rng.integers(1 << 62):040x}" for _ in range(args.n)]
    buf, off = K.pack_strings(ids)
    q, n = args.queries, args.entities
    scores = rng.integers(0, 50, size=(q, n)).astype(np.float64)  # plenty of ties
    targets = rng.integers(0, n, size=q)
    filt = rng.random((q, n)) < 0.01

    rows = []
    if K.HAVE_NUMBA:
        # warm up the JIT so compile time is not counted
        K.fnv_batch(buf[:64], off[:2], use_numba=True)
        K.filtered_ranks(scores[:2], targets[:2], filt[:2], use_numba=True)
    for name, call in [
        ("fnv1a batch", lambda u: K.fnv_batch(buf, off, use_numba=u)),
        ("filtered ranks", lambda u: K.filtered_ranks(scores, targets, filt, use_numba=u)),
    ]:
        t_np, r_np = _best(lambda: call(False), args.repeat)
        if K.HAVE_NUMBA:
            t_nb, r_nb = _best(lambda: call(True), args.repeat)
            same = bool(np.array_equal(r_np, r_nb))
        else:
            t_nb, same = float("nan"), True
        rows.append((name, t_np, t_nb, same))

    print(f"numba available: {K.HAVE_NUMBA}")
    print(f"{'kernel':<16} {'numpy s':>10} {'numba s':>10} {'speedup':>8}  equal")
    for name, a, b, same in rows:
        print(f"{name:<16} {a:>10.4f} {b:>10.4f} {a / b if b == b else float('nan'):>8.1f}  {same}")
    if not all(r[3] for r in rows):
        raise SystemExit("numba and numpy results differ")


if __name__ == "__main__":
    main()
