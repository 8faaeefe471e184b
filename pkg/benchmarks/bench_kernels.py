"""Compiled vs pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times ``pair_hamiltonian`` and ``collective_moments`` from both backends on
the cluster sizes used by the figure presets, checks that they agree, and
prints one line per case.
"""

import argparse
import timeit

import numpy as np

from spinsense import _kernels_py

try:
    from spinsense import _kernels as compiled
except ImportError:
    compiled = None

CASES = [(1, 2), (1, 4), (1, 6), (2, 3), (2, 6), (3, 4)]  # (2s, M)


def make_inputs(twice_s, n_sites, batch, rng):
    n_pairs = n_sites * (n_sites - 1) // 2
    pairs = np.array([(i, j) for i in range(n_sites) for j in range(i + 1, n_sites)])
    couplings = rng.standard_normal((batch, n_pairs, 3, 3))
    couplings = 0.5 * (couplings + np.swapaxes(couplings, -1, -2))
    dim = (twice_s + 1) ** n_sites
    states = rng.standard_normal((batch * 8, dim)) + 1j * rng.standard_normal((batch * 8, dim))
    states /= np.linalg.norm(states, axis=1, keepdims=True)
    return couplings, pairs, states


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--batch", type=int, default=64)
    args = parser.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; only the fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':20s} {'2s':>3s} {'M':>3s} {'python ms':>11s} {'compiled ms':>12s} "
          f"{'speedup':>8s} {'max diff':>9s}")
    for twice_s, n_sites in CASES:
        couplings, pairs, states = make_inputs(twice_s, n_sites, args.batch, rng)
        jobs = {
            "pair_hamiltonian": lambda k: k.pair_hamiltonian(couplings, pairs, twice_s, n_sites),
            "collective_moments": lambda k: k.collective_moments(states, twice_s, n_sites),
        }
        for name, job in jobs.items():
            t_py = best_of(lambda: job(_kernels_py), args.repeat)
            if compiled is None:
                print(f"{name:20s} {twice_s:3d} {n_sites:3d} {1e3 * t_py:11.2f}")
                continue
            t_c = best_of(lambda: job(compiled), args.repeat)
            ref, out = job(_kernels_py), job(compiled)
            if not isinstance(ref, tuple):
                ref, out = (ref,), (out,)
            diff = max(float(np.max(np.abs(a - b))) for a, b in zip(ref, out))
            print(f"{name:20s} {twice_s:3d} {n_sites:3d} {1e3 * t_py:11.2f} {1e3 * t_c:12.2f} "
                  f"{t_py / t_c:8.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
