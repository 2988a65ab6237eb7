"""Compare the compiled kernels with the numpy fallback.

Run ``python benchmarks/bench_kernels.py``; each kernel is timed on the same
inputs with both backends and the results are checked for agreement.
"""

import argparse
import timeit

import numpy as np

from relupath import _backend


def cases(rng, scale):
    lo = rng.normal(size=(1 << (8 + scale), 16))
    hi = rng.normal(size=(1 << (8 + scale), 16))
    widths = [1, 16, 16, 16, 16, 8 + 8 * scale]  # ~1e6 paths at scale 1
    mats = [rng.random((widths[k], widths[k + 1])) for k in range(len(widths) - 1)]
    vals = rng.normal(size=(1000 * (1 + scale), 20))
    return {
        "pattern_sups": lambda k: k.pattern_sups(lo, hi),
        "path_product_sum": lambda k: k.path_product_sum(mats),
        "greedy_pack": lambda k: k.greedy_pack(vals, 20.0),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scale", type=int, default=1, help="problem size knob (0-3)")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    if _backend.compiled_kernels is None:
        print("compiled extension not available; only the fallback will be timed")
    backends = {"python": _backend.python_kernels}
    if _backend.compiled_kernels is not None:
        backends["cython"] = _backend.compiled_kernels

    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for name, fn in cases(rng, args.scale).items():
        times, outs = {}, {}
        for bname, k in backends.items():
            outs[bname] = fn(k)
            times[bname] = min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
        if len(outs) == 2:
            a, b = (np.asarray(o, dtype=float) for o in outs.values())
            assert np.allclose(a, b, rtol=1e-12), name
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<18}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends) + f"{speedup:>9.1f}x")


if __name__ == "__main__":
    main()
