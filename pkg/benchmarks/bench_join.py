"""Benchmark the threshold join on both compute backends.

Run without arguments to compare the jit-compiled kernels against the pure
numpy fallback; each backend is timed in a fresh subprocess because the
backend is chosen at import time via DBGRAPH_NO_NUMBA.

    python benchmarks/bench_join.py
    python benchmarks/bench_join.py --n 2000 --dim 768 --workers 4
"""

import argparse
import json
import os
import subprocess
import sys
import time


def run_single(n: int, dim: int, threshold: float, tile: int, workers: int,
               repeats: int) -> dict:
    import numpy as np

    from dbgraph._accel import USING_NUMBA
    from dbgraph.embeddings import make_matrix, threshold_join

    rng = np.random.default_rng(0)
    base = rng.normal(size=(8, dim))
    rows = base[rng.integers(0, 8, size=n)] + 0.3 * rng.normal(size=(n, dim))
    matrix = make_matrix([f"{i:06d}" for i in range(n)], rows.astype(np.float32))

    threshold_join(matrix, threshold, tile=tile, workers=workers)  # warmup/jit
    times = []
    edges = 0
    for _ in range(repeats):
        start = time.perf_counter()
        result = threshold_join(matrix, threshold, tile=tile, workers=workers)
        times.append(time.perf_counter() - start)
        edges = len(result)
    return {
        "backend": "numba" if USING_NUMBA else "numpy",
        "n": n,
        "dim": dim,
        "tile": tile,
        "workers": workers,
        "edges": edges,
        "best_s": min(times),
        "mean_s": sum(times) / len(times),
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=1500)
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--threshold", type=float, default=0.8)
    parser.add_argument("--tile", type=int, default=256)
    parser.add_argument("--workers", type=int, default=4)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--single", action="store_true",
                        help="time only the backend active in this process")
    args = parser.parse_args(argv)

    if args.single:
        print(json.dumps(run_single(args.n, args.dim, args.threshold,
                                    args.tile, args.workers, args.repeats)))
        return 0

    results = []
    for no_numba in ("0", "1"):
        env = dict(os.environ, DBGRAPH_NO_NUMBA=no_numba)
        cmd = [sys.executable, os.path.abspath(__file__), "--single",
               "--n", str(args.n), "--dim", str(args.dim),
               "--threshold", str(args.threshold), "--tile", str(args.tile),
               "--workers", str(args.workers), "--repeats", str(args.repeats)]
        out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        results.append(json.loads(out.stdout.strip().splitlines()[-1]))

    print(f"{'backend':<8} {'n':>6} {'dim':>5} {'workers':>7} "
          f"{'edges':>8} {'best_s':>9} {'mean_s':>9}")
    for r in results:
        print(f"{r['backend']:<8} {r['n']:>6} {r['dim']:>5} {r['workers']:>7} "
              f"{r['edges']:>8} {r['best_s']:>9.4f} {r['mean_s']:>9.4f}")
    fast, slow = results[0], results[1]
    if fast["best_s"] > 0:
        print(f"speedup ({slow['backend']} / {fast['backend']}): "
              f"{slow['best_s'] / fast['best_s']:.2f}x")
    if fast["edges"] != slow["edges"]:
        print("WARNING: backends disagree on edge count", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
