"""Compare the numba and pure-numpy kernel backends on identical inputs.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--n SIZE]

Each kernel is run once per backend to warm up (compilation for numba), then
timed as the best of ``--repeat`` runs. Results must agree between backends;
a mismatch aborts.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from degmag import _jit
from degmag import kernels as K


def _best(fn, repeat: int) -> tuple[float, object]:
    out = fn()
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases(n: int, rng: np.random.Generator) -> dict:
    d = rng.normal(size=n)
    e = rng.normal(size=n - 1)
    lower, upper = rng.normal(size=n + 1), rng.normal(size=n + 1)
    p = 40
    m = 20 * n
    bands = np.zeros((p + 1, m), dtype=complex)
    bands[0] = 4.0 * p + rng.normal(size=m)
    for j in range(1, p + 1):
        bands[j, : m - j] = rng.normal(size=m - j) + 1j * rng.normal(size=m - j)
    shifts = np.linspace(-3, 3, 64)
    return {
        "sturm_counts": lambda: K.sturm_counts(d, e * e, shifts),
        "bisect_eigenvalues": lambda: K.bisect_eigenvalues(d, e, np.arange(20), 1e-13, 1e-300),
        "bisect_singular_values": lambda: K.bisect_singular_values(lower, upper, np.arange(20), 1e-13),
        "ldlt_inertia": lambda: K.ldlt_inertia(bands, 4.0 * p),
    }


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n", type=int, default=4000)
    args = ap.parse_args(argv)
    if not _jit.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    work = cases(args.n, rng)
    prev = _jit.backend()
    print(f"{'kernel':<24}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    try:
        for name, fn in work.items():
            res = {}
            for be in ("numba", "numpy"):
                _jit.set_backend(be)
                res[be] = _best(fn, args.repeat)
            a, b = res["numba"][1], res["numpy"][1]
            if not np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-10, atol=0):
                raise SystemExit(f"{name}: backends disagree")
            tn, tp = res["numba"][0], res["numpy"][0]
            print(f"{name:<24}{tn:>12.4g}{tp:>12.4g}{tp / tn:>10.1f}")
    finally:
        _jit.set_backend(prev)


if __name__ == "__main__":
    main()
