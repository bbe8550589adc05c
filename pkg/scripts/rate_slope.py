"""Uniform-init bandit runs: mean-gap log-log slope over several windows."""

import argparse
import json

import numpy as np

from npg_lab.diagnostics import fit_rate_slope
from npg_lab.experiments import mean_gap_trace, preset, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--iterations", type=int, default=10**6)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out-dir", default=None)
    args = ap.parse_args()

    spec = preset("bandit-uniform-deterministic").with_overrides(
        seeds=tuple(range(args.seeds)), iterations=args.iterations
    )
    results = run_experiment(spec, out_dir=args.out_dir, threads=args.threads)
    t, gap = mean_gap_trace(results)
    report = {}
    for lo in (1e2, 1e3, 1e4, 1e5):
        if lo * 10 <= args.iterations:
            slope, r2 = fit_rate_slope(t, gap, (lo, args.iterations))
            report[f"[{lo:.0e}, {args.iterations:.0e}]"] = {"slope": slope, "r2": r2}
    idx = np.searchsorted(t, [10**k for k in range(2, 7) if 10**k <= args.iterations])
    report["t_times_gap"] = {str(int(t[i])): float(t[i] * gap[i]) for i in idx}
    report["monotone_violations"] = sum(r.summary.monotone_violations for r in results)
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
