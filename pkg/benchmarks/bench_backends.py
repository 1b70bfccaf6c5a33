"""Compare the compiled and pure-numpy kernel backends on layer forwards.

Usage: python benchmarks/bench_backends.py [--reps 7] [--batch 50] [--out timings.csv]
"""

import argparse
import csv
import statistics
import sys
import time

import numpy as np

from symtensor import backend
from symtensor.layer import _plan
from symtensor.symidx import num_indices

CASES = [(2, 1, 8), (3, 0, 12), (3, 1, 8), (2, 2, 8), (3, 1, 16), (3, 2, 8), (4, 1, 8)]


def time_backend(name, plan, x, reps):
    backend.run_plan(plan, x, name)
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        backend.run_plan(plan, x, name)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--reps", type=int, default=7)
    p.add_argument("--batch", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    args = p.parse_args(argv)

    names = backend.available()
    if "cython" not in names:
        print("compiled extension not built; only the numpy backend is available", file=sys.stderr)
    rng = np.random.default_rng(args.seed)
    rows = []
    for k, l, n in CASES:
        plan = _plan(k, l, n)
        x = rng.standard_normal((args.batch, num_indices(n, k)))
        outs = {name: backend.run_plan(plan, x, name) for name in names}
        ref = outs["python"]
        agree = all(np.allclose(o, ref, rtol=1e-12, atol=1e-12) for o in outs.values())
        row = {"k": k, "l": l, "n": n, "batch": args.batch, "agree": agree}
        for name in names:
            row[f"{name}_s"] = time_backend(name, plan, x, args.reps)
        if "cython" in names:
            row["python_over_cython"] = row["python_s"] / row["cython_s"]
        rows.append(row)

    fields = list(rows[0])
    stream = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(stream, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out:
        stream.close()
    return 0 if all(r["agree"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
