"""Time the hot kernels with numba and with the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py            # runs both, prints a table
    python3 benchmarks/bench_kernels.py --single   # current process only (used internally)

The fallback runs in a child process with SU21BQ_DISABLE_NUMBA=1 because the
choice is made at import time.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit


def measure(repeat: int) -> dict:
    import numpy as np

    from su21bq import kernels

    rng = np.random.default_rng(0)
    t = rng.normal(size=200_000) + 1j * rng.normal(size=200_000)
    r = np.linspace(0.5, 2.0, 400)
    s = np.linspace(0.0, 2 * np.pi, 400)
    cases = {
        "resultant_array[2e5]": lambda: kernels.resultant_array(t),
        "b_squared_grid[400x400]": lambda: kernels.b_squared_grid(6.0, r, s),
        "sharkfin_grid[400x400]": lambda: kernels.sharkfin_grid(r, s),
        "ball_vertices[dist=14]": lambda: kernels.ball_vertices(8, 8, 8, 35, 14),
        "fan_extend[2e4]": lambda: kernels.fan_extend(1.5 + 2j, 1.0, 2.0, 3.0, 10_000, 10_000),
    }
    out = {"numba": kernels.HAVE_NUMBA}
    for name, fn in cases.items():
        fn()  # compile or warm caches
        out[name] = min(timeit.repeat(fn, number=1, repeat=repeat))
    return out


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--single", action="store_true")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if args.single:
        print(json.dumps(measure(args.repeat)))
        return
    runs = {}
    for label, disable in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, SU21BQ_DISABLE_NUMBA=disable)
        res = subprocess.run([sys.executable, __file__, "--single", "--repeat", str(args.repeat)],
                             env=env, capture_output=True, text=True, check=True)
        runs[label] = json.loads(res.stdout)
    if not runs["numba"].pop("numba"):
        print("numba is not importable; both columns use the fallback")
    runs["numpy"].pop("numba")
    print(f"{'kernel':28s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speedup':>8s}")
    for name in runs["numba"]:
        a, b = runs["numba"][name] * 1e3, runs["numpy"][name] * 1e3
        print(f"{name:28s} {a:12.3f} {b:12.3f} {b / a:8.1f}")


if __name__ == "__main__":
    main()
