"""Time the compiled and pure-Python kernels on harmonization- and training-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from drgkit import kernels
from drgkit.catalog import bundled_catalog_path, load_catalog
from drgkit.features import FeatureMatrix


def _workloads(rng):
    catalog = load_catalog(bundled_catalog_path())
    targets = [" ".join(sorted(e.drg.description.split())) for e in catalog.entries]
    query = "CONCUSSION WITH CC"

    dense = rng.random((64, 2000)) * (rng.random((64, 2000)) < 0.02)
    x = FeatureMatrix.from_dense(dense)
    w = np.ascontiguousarray(rng.normal(size=(757, 2000)))
    g = np.ascontiguousarray(rng.normal(size=(64, 757)))

    def lev(mod):
        return lambda: [mod.levenshtein(query, t) for t in targets]

    def matmul(mod):
        return lambda: mod.sparse_matmul(x.indptr, x.indices, x.data, w)

    def grad(mod):
        out = np.zeros_like(w)
        return lambda: mod.sparse_grad_accumulate(x.indptr, x.indices, x.data, g, out)

    return {"levenshtein x757": lev, "sparse_matmul 64x2000 -> 757": matmul,
            "sparse_grad_accumulate 64x757": grad}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    print(f"backends: {', '.join(sorted(backends))} (active: {kernels.BACKEND})")
    print(f"{'kernel':34s}" + "".join(f"{name:>12s}" for name in sorted(backends)) + f"{'speedup':>10s}")
    for label, make in _workloads(np.random.default_rng(0)).items():
        times = {}
        for name, mod in sorted(backends.items()):
            fn = make(mod)
            times[name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:34s}" + "".join(f"{times[n] * 1e3:10.2f}ms" for n in sorted(times)) + f"{speed:9.1f}x")


if __name__ == "__main__":
    main()
