"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from eotrack import _kernels_py
from eotrack.consensus import generate_network

try:
    from eotrack import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def latent_case(n_nodes, rate, d=2, seed=0):
    rng = np.random.default_rng(seed)
    counts = rng.poisson(rate, n_nodes)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    Y = rng.normal(size=(offsets[-1], d)) * 100.0
    eye = np.broadcast_to(np.eye(d), (n_nodes, d, d)).copy()
    hm = rng.normal(size=(n_nodes, d))
    return (Y, offsets, eye * 1e-3, eye * 1e-4, hm, hm)


def admm_case(n_nodes, width, rounds, seed=0):
    rng = np.random.default_rng(seed)
    net = generate_network(n_nodes, 2.5, 0.8, rng)
    indptr, indices = net.csr
    return (rng.normal(size=(n_nodes, width)), indptr, indices, 0.5, rounds)


def bench(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    cases = [
        ("latent_sums N=20 rate=20", "latent_sums", latent_case(20, 20)),
        ("latent_sums N=100 rate=200", "latent_sums", latent_case(100, 200)),
        ("admm_consensus N=20 p=9 L=30", "admm_consensus", admm_case(20, 9, 30)),
        ("admm_consensus N=20 p=9 L=100", "admm_consensus", admm_case(20, 9, 100)),
    ]
    print(f"{'case':34s} {'numpy [ms]':>11s} {'cython [ms]':>12s} {'speedup':>8s}")
    for label, name, case in cases:
        t_py = bench(getattr(_kernels_py, name), case, args.repeat) * 1e3
        if _ckernels is None:
            print(f"{label:34s} {t_py:11.3f} {'n/a':>12s}")
            continue
        t_c = bench(getattr(_ckernels, name), case, args.repeat) * 1e3
        print(f"{label:34s} {t_py:11.3f} {t_c:12.3f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
