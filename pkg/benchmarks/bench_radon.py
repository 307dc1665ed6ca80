"""Timing comparison of the two Radon backends.

Runs forward and adjoint projections at several image sizes with both the
compiled kernel and the pure-NumPy fallback, checks they agree, and prints
a throughput table. Usage:

    python3 benchmarks/bench_radon.py [--sides 64,128,256] [--angles 90]
                                      [--repeats 5]
"""

import argparse
import time

import numpy as np

from sparsetomo.phantoms import generate_phantom
from sparsetomo.radon import (
    make_operator,
    radon_adjoint,
    radon_forward,
    sample_angles,
)

try:
    from sparsetomo import _radon_cy  # noqa: F401
    HAVE_CYTHON = True
except ImportError:
    HAVE_CYTHON = False


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_side(side, n_angles, repeats):
    img = generate_phantom("plant_like", side, seed=0)
    op = make_operator(side, sample_angles(n_angles, 0))
    backends = ["numpy"] + (["cython"] if HAVE_CYTHON else [])

    sinos = {b: radon_forward(op, img, backend=b) for b in backends}
    if HAVE_CYTHON:
        gap = np.max(np.abs(sinos["cython"].values - sinos["numpy"].values))
        scale = max(np.max(np.abs(sinos["numpy"].values)), 1.0)
        assert gap <= 1e-10 * scale, f"backends disagree: forward gap {gap:.3e}"
        back_c = radon_adjoint(op, sinos["cython"], backend="cython")
        back_n = radon_adjoint(op, sinos["numpy"], backend="numpy")
        gap = np.max(np.abs(back_c.values - back_n.values))
        assert gap <= 1e-10 * max(np.max(np.abs(back_n.values)), 1.0), \
            f"backends disagree: adjoint gap {gap:.3e}"

    rows = []
    for b in backends:
        fwd = best_of(lambda: radon_forward(op, img, backend=b), repeats)
        adj = best_of(lambda: radon_adjoint(op, sinos[b], backend=b), repeats)
        rows.append((b, fwd, adj))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sides", default="64,128,256",
                    help="comma-separated image sides")
    ap.add_argument("--angles", type=int, default=90, help="number of angles")
    ap.add_argument("--repeats", type=int, default=5,
                    help="repetitions per timing (best is reported)")
    args = ap.parse_args()
    sides = [int(s) for s in args.sides.split(",")]

    if not HAVE_CYTHON:
        print("note: compiled extension not available, timing NumPy only")
    print(f"{'side':>6} {'backend':>8} {'forward [ms]':>13} {'adjoint [ms]':>13}"
          f" {'speedup fwd':>12} {'speedup adj':>12}")
    for side in sides:
        rows = bench_side(side, args.angles, args.repeats)
        base_fwd, base_adj = rows[0][1], rows[0][2]
        for b, fwd, adj in rows:
            print(f"{side:>6} {b:>8} {fwd * 1e3:>13.2f} {adj * 1e3:>13.2f}"
                  f" {base_fwd / fwd:>11.1f}x {base_adj / adj:>11.1f}x")


if __name__ == "__main__":
    main()
