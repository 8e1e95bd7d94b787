"""Time the numba kernels against the numpy fallback on a synthetic city.

    python benchmarks/bench_kernels.py --grid 60 --mode walk --repeat 3

First-call numba time (JIT compile, or a cache load) is reported separately.
Both backends must agree; the script exits non-zero if they do not.
"""
import argparse
import os
import sys
import time

import numpy as np

from gravcat import kernels
from gravcat._backend import DISABLE_ENV, HAVE_NUMBA, set_threads
from gravcat.model import Mode, mph_to_km_per_min
from gravcat.netgen import SyntheticCity, generate

DEFAULT_SPEED = {Mode.DRIVE: 60.0, Mode.WALK: 4.0, Mode.BIKE: 16.0}


def timed(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def use_numba(on):
    if on:
        os.environ.pop(DISABLE_ENV, None)
    else:
        os.environ[DISABLE_ENV] = "1"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=50, help="side of the square grid (zones = grid^2)")
    ap.add_argument("--spacing", type=float, default=0.5)
    ap.add_argument("--mode", default="walk", choices=[m.value for m in Mode])
    ap.add_argument("--tau", type=float, default=60.0)
    ap.add_argument("--max-threshold", type=float, default=90.0)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        sys.exit("numba is not importable; nothing to compare")
    set_threads(args.threads)
    mode = Mode.parse(args.mode)

    city = generate(SyntheticCity(rows=args.grid, cols=args.grid, spacing_km=args.spacing, seed=0))
    g = city.graph
    n = g.n_nodes
    w = g.edge_minutes(mode)
    lat = np.array([z.centroid_lat for z in city.zones])
    lon = np.array([z.centroid_lon for z in city.zones])
    opp = city.opportunities.vector("jobs_total", g.zone_ids)
    rows = np.arange(n, dtype=np.int64)
    alpha, beta = 0.008, 1.467
    v = mph_to_km_per_min(DEFAULT_SPEED[mode])

    def sssp():
        return kernels.bounded_all_pairs(n, g.u, g.v, w, args.max_threshold)

    indptr, idx, t = sssp()

    cases = {
        "bounded_all_pairs": sssp,
        "row_accumulate": lambda: kernels.row_accumulate(indptr, idx, t, rows, opp, alpha, beta, args.tau),
        "ideal_accumulate": lambda: kernels.ideal_accumulate(lat, lon, rows, opp, alpha, beta, args.tau, v),
    }

    print(f"{n} zones, {idx.size / n:.0f} stored pairs per origin, mode {mode.value}, tau {args.tau:g}")
    print(f"{'kernel':<20}{'numba 1st':>11}{'numba':>10}{'numpy':>10}{'speedup':>9}")
    ok = True
    for name, fn in cases.items():
        use_numba(True)
        first, _ = timed(fn, 1)
        fast, a = timed(fn, args.repeat)
        use_numba(False)
        slow, b = timed(fn, args.repeat)
        use_numba(True)
        a, b = (a if isinstance(a, tuple) else (a,)), (b if isinstance(b, tuple) else (b,))
        agree = all(np.allclose(x, y, rtol=1e-12, atol=0) and x.shape == y.shape for x, y in zip(a, b))
        ok &= agree
        print(f"{name:<20}{first:>10.3f}s{fast:>9.3f}s{slow:>9.3f}s{slow / fast:>8.1f}x" + ("" if agree else "  MISMATCH"))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
