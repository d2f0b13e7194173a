"""Time the compiled kernels against the numpy fallback.

Usage: ``python3 benchmarks/bench_kernels.py [--sizes 10000 1000000] [--repeat 5]``

Both backends are imported directly, so the comparison does not depend on
which one the package selected at import. Results are also checked for
agreement, since the benchmark is only meaningful if the answers match.
"""
import argparse
import time

import numpy as np

from entropy_lattice import _kernels_py

try:
    from entropy_lattice import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

CHUNK = 4096


def lse(mod, terms, signs):
    s, l = mod.chunk_logsumexp(terms, signs, CHUNK)
    return mod.tree_merge(s, l)


def alias(mod, probs, u0, u1):
    q, J = mod.alias_build(probs)
    return mod.alias_draw(q, J, u0, u1)


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[10_000, 100_000, 1_000_000])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    if _kernels_c is None:
        print("compiled extension not built; only the fallback can be timed")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<16}{'n':>10}{'python [s]':>14}{'cython [s]':>14}{'speedup':>10}  agree")
    for n in args.sizes:
        terms = rng.normal(scale=50.0, size=n)
        signs = np.ones(n, dtype=np.int8)
        probs = rng.random(n)
        probs /= probs.sum()
        u0, u1 = rng.random(n), rng.random(n)
        cases = [
            ("logsumexp", lambda m: lse(m, terms, signs)),
            ("alias", lambda m: alias(m, probs, u0, u1)),
        ]
        for name, fn in cases:
            tp, rp = best_of(lambda: fn(_kernels_py), args.repeat)
            if _kernels_c is None:
                print(f"{name:<16}{n:>10}{tp:>14.5f}{'-':>14}{'-':>10}  -")
                continue
            tc, rc = best_of(lambda: fn(_kernels_c), args.repeat)
            if name == "logsumexp":
                agree = rp[0] == rc[0] and abs(rp[1] - rc[1]) <= 1e-13 * max(1.0, abs(rp[1]))
            else:
                agree = bool(np.array_equal(rp, rc))
            print(f"{name:<16}{n:>10}{tp:>14.5f}{tc:>14.5f}{tp / tc:>10.1f}  {agree}")


if __name__ == "__main__":
    main()
