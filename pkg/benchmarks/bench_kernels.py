"""Compare the numba and numpy flavours of the hot kernels.

Run ``python3 benchmarks/bench_kernels.py [--repeat R] [--json out.json]``.
Each kernel is called once to trigger compilation, then timed with
``timeit``; the script also checks that both flavours agree.
"""
from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from artifact import _kernels as K


def _cases(rng: np.random.Generator) -> dict:
    x = rng.uniform(-1.0, 1.0, 200_000)
    values = np.sort(rng.exponential(size=50_000))[::-1].copy()
    measures = rng.exponential(size=50_000)
    coefs = rng.standard_normal(4)
    xd = rng.uniform(-1.0, 1.0, 200_000)
    s = rng.uniform(0.0, 1.0, 200_000)
    return {
        "gegenbauer_array": ((12, 1.0, x), K.gegenbauer_array_numba, K.gegenbauer_array_numpy),
        "step_seminorm": ((values, measures, 2.0, 1.0), K.step_seminorm_numba,
                          K.step_seminorm_numpy),
        "ladder_partials": ((coefs, 6, xd, s), K.ladder_partials_numba, K.ladder_partials_numpy),
    }


def run(repeat: int = 5, seed: int = 0) -> list:
    rows = []
    for name, (args, fast, slow) in _cases(np.random.default_rng(seed)).items():
        ref = np.asarray(slow(*args))
        got = np.asarray(fast(*args))  # compiles on first call when numba is present
        scale = max(float(np.max(np.abs(ref))), 1e-300)
        t_fast = min(timeit.repeat(lambda: fast(*args), number=1, repeat=repeat))
        t_slow = min(timeit.repeat(lambda: slow(*args), number=1, repeat=repeat))
        rows.append({"kernel": name, "numba_s": t_fast, "numpy_s": t_slow,
                     "speedup": t_slow / t_fast if t_fast > 0 else float("inf"),
                     "max_rel_diff": float(np.max(np.abs(got - ref))) / scale})
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--json", help="also write the rows to this file")
    args = parser.parse_args(argv)
    if not K.HAVE_NUMBA:
        print("numba is not importable; both columns time the numpy path")
    rows = run(args.repeat, args.seed)
    print(f"{'kernel':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max rel diff':>14}")
    for r in rows:
        print(f"{r['kernel']:<18}{r['numba_s']:>12.5f}{r['numpy_s']:>12.5f}"
              f"{r['speedup']:>10.2f}{r['max_rel_diff']:>14.2e}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=1)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
