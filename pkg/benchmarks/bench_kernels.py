"""Time the compiled and numpy candidate evaluators on identical batches."""

import argparse
import time

import numpy as np

from srcrr.region import binary_spec
from srcrr.search import QBEvaluator, StarEvaluator


def best_of(fn, Q, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(Q)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20000, help="candidates per batch")
    ap.add_argument("--k", type=int, default=4, help="auxiliary alphabet size")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    src = binary_spec(0.05, 0.2, 0.1)
    rng = np.random.default_rng(args.seed)
    Q_star = rng.dirichlet(np.ones(args.k), size=(args.n, 2))
    Q_qb = rng.dirichlet(np.ones(2), size=(args.n, 2))

    for name, cls, Q in (("star_batch", StarEvaluator, Q_star), ("qb_batch", QBEvaluator, Q_qb)):
        try:
            fast = cls(src, backend="cython")
        except ImportError:
            print(f"{name}: compiled extension not built, skipping")
            continue
        slow = cls(src, backend="python")
        ra, rb = fast(Q), slow(Q)
        err = max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in zip(ra, rb))
        tc = best_of(fast, Q, args.repeat)
        tp = best_of(slow, Q, args.repeat)
        print(f"{name}: n={args.n} cython {tc * 1e3:.2f} ms  numpy {tp * 1e3:.2f} ms  "
              f"speedup {tp / tc:.1f}x  max|diff| {err:.1e}")


if __name__ == "__main__":
    main()
