"""Time the compiled and pure-numpy kernels on the same inputs.

Usage::

    python3 benchmarks/bench_backends.py [--rays 2000] [--repeat 3] [--json out.json]

Reports the best-of-``repeat`` wall time per kernel and backend, plus the
largest difference between the two backends' outputs.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from roughwave import _backend, eikonal, metric


def _ray_inputs(n, m, seed=0):
    bump = metric.bump_metric(0.1)
    rng = np.random.default_rng(seed)
    y0 = np.zeros((n, 6 + 6 * m))
    y0[:, :3] = rng.uniform(-1.0, 1.0, (n, 3))
    w = rng.standard_normal((n, 3))
    y0[:, 3:6] = w / np.linalg.norm(w, axis=1, keepdims=True)
    if m:
        y0[:, 6:] = rng.standard_normal((n, 6 * m))
    params = np.concatenate([bump.params(), [bump.R + eikonal.FOOT_SLACK]])
    return params, y0, np.zeros(n), np.full(n, 1.0), m


def _osc_inputs(rows, nodes, n_lam, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-30, 30, (rows, nodes)), rng.standard_normal((rows, nodes)), 0.5, 0.01, rng.uniform(0, 1, n_lam)


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rays", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write results to this file")
    args = ap.parse_args(argv)

    backends = {"python": _backend.get("python")}
    try:
        backends["cython"] = _backend.get("cython")
    except ImportError:
        print("compiled extension not built; timing the numpy fallback only", file=sys.stderr)

    cases = {
        "integrate_rays m=0": ("integrate_rays", _ray_inputs(args.rays, 0)),
        "integrate_rays m=5": ("integrate_rays", _ray_inputs(args.rays // 4, 5)),
        "osc_sum 64x2000x600": ("osc_sum", _osc_inputs(64, 2000, 600)),
    }
    results = {}
    for label, (kernel, inputs) in cases.items():
        row, outs = {}, {}
        for name, mod in backends.items():
            fn = getattr(mod, kernel)
            outs[name] = fn(*inputs)
            row[name] = _best(lambda: fn(*inputs), args.repeat)
        if len(outs) == 2:
            a, b = outs["python"], outs["cython"]
            a, b = (a[0], b[0]) if isinstance(a, tuple) else (a, b)
            row["max_abs_diff"] = float(np.max(np.abs(a - b)))
            row["speedup"] = row["python"] / row["cython"]
        results[label] = row
        line = "  ".join(f"{k} {v:.3g}{'s' if k in backends else ''}" for k, v in row.items())
        print(f"{label:24s} {line}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"default_backend": _backend.NAME, "results": results}, fh, indent=2, sort_keys=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
