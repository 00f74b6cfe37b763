"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--n 4000] [--repeat 20]

One likelihood evaluation is what the optimizer calls per gradient component,
so the per-call time bounds the cost of a fit.
"""

import argparse
import timeit

import numpy as np

from ewmask import _kernels_py

try:
    from ewmask import _kernels as _compiled
except ImportError:
    _compiled = None

FLOOR = 1e-12


def cases(eps):
    return {
        "riskmetrics_variance": lambda k: k.riskmetrics_variance(eps, 0.94, 1.0),
        "garch_variance": lambda k: k.garch_variance(eps, 0.02, 0.08, 0.9, 1.0),
        "garch_loglik": lambda k: k.garch_loglik(eps, 0.02, 0.08, 0.9, 1.0, FLOOR),
        "ewma_sk_path": lambda k: k.ewma_sk_path(eps, 0.97, 0.96, 0.93, 1.0, 0.0, 3.0),
        "ewma_sk_loglik": lambda k: k.ewma_sk_loglik(eps, 0.97, 0.96, 0.93, 1.0, 0.0, 3.0, FLOOR),
    }


def best_time(fn, impl, repeat):
    timer = timeit.Timer(lambda: fn(impl))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4000, help="series length")
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    eps = np.random.default_rng(args.seed).standard_t(5, args.n)
    impls = [("python", _kernels_py)] + ([("cython", _compiled)] if _compiled else [])
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<22}" + "".join(f"{name:>14}" for name, _ in impls) + ("     speedup" if _compiled else ""))
    for name, fn in cases(eps).items():
        times = [best_time(fn, impl, args.repeat) for _, impl in impls]
        row = f"{name:<22}" + "".join(f"{t * 1e6:>11.1f} us" for t in times)
        if _compiled:
            row += f"{times[0] / times[1]:>11.1f}x"
        print(row)
    if _compiled is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")


if __name__ == "__main__":
    main()
