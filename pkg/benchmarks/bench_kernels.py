"""Compare the compiled kernels with their pure-Python fallbacks.

Times simplex projection, box-simplex projection and the Hungarian method
over a range of sizes, checks that both backends return the same answer,
and prints a table (or JSON with ``--json``).

    python benchmarks/bench_kernels.py --sizes 10 100 1000 --repeat 5
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from resalloc.kernels import _pykernels

try:
    from resalloc.kernels import _ckernels
except ImportError:  # pragma: no cover - extension not built
    _ckernels = None


def _cases(n: int, rng: np.random.Generator) -> dict:
    v = rng.normal(size=n)
    lower = np.zeros(n)
    upper = rng.uniform(0.05, 0.5, n)
    return {
        "project_simplex_sorted": ((v, 1.0), lambda a, b: np.allclose(a, b, atol=1e-12)),
        "project_box_simplex": ((v, lower, upper, 1.0), lambda a, b: np.allclose(a, b, atol=1e-12)),
        "hungarian_min": ((rng.normal(size=(n, n)),), lambda a, b: np.array_equal(np.asarray(a), np.asarray(b))),
    }


def _time(fn, args, repeat: int) -> float:
    number = 1
    t = min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat))
    return t / number


def run(sizes: list[int], repeat: int, seed: int, hungarian_max: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        for name, (args, same) in _cases(n, rng).items():
            if name == "hungarian_min" and n > hungarian_max:
                continue
            py = getattr(_pykernels, name)
            row = {"kernel": name, "n": n, "python_s": _time(py, args, repeat)}
            if _ckernels is not None:
                cy = getattr(_ckernels, name)
                row["cython_s"] = _time(cy, args, repeat)
                row["speedup"] = row["python_s"] / row["cython_s"]
                row["agree"] = bool(same(py(*args), cy(*args)))
            rows.append(row)
    return rows


def format_rows(rows: list[dict]) -> str:
    out = [f"{'kernel':<24}{'n':>7}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}{'agree':>7}"]
    for r in rows:
        cy = f"{1e3 * r['cython_s']:14.4f}" if "cython_s" in r else f"{'-':>14}"
        sp = f"{r['speedup']:10.1f}" if "speedup" in r else f"{'-':>10}"
        ag = f"{str(r.get('agree', '-')):>7}"
        out.append(f"{r['kernel']:<24}{r['n']:>7}{1e3 * r['python_s']:14.4f}{cy}{sp}{ag}")
    return "\n".join(out)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 100, 1000])
    ap.add_argument("--repeat", type=int, default=5, help="timing repetitions (best is reported)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--hungarian-max", type=int, default=300, help="skip the O(n^3) matching above this size")
    ap.add_argument("--json", action="store_true", help="print JSON instead of a table")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; timing the fallback only", file=sys.stderr)
    rows = run(args.sizes, args.repeat, args.seed, args.hungarian_max)
    print(json.dumps(rows, indent=2) if args.json else format_rows(rows))
    return 0 if all(r.get("agree", True) for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
