"""Adversarial-init stochastic-reward bandit: escape times from the sub-optimal plateau."""

import argparse

import numpy as np

from npg_lab.experiments import preset, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--iterations", type=int, default=2 * 10**7)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out-dir", default=None)
    args = ap.parse_args()

    spec = preset("bandit-adversarial-stochastic").with_overrides(
        seeds=tuple(range(args.seeds)), iterations=args.iterations
    )
    results = run_experiment(spec, out_dir=args.out_dir, threads=args.threads)
    r_star = spec.environment.r.max()
    for res in results:
        s = res.summary
        esc = s.escape_time if s.escaped_plateau else "not yet"
        print(
            f"seed {s.seed}: final {s.final_value:.5f} (|r* - final| = {abs(r_star - s.final_value):.4f}), "
            f"escape t = {esc}, min pi(a*) = {s.min_opt_prob:.3g}"
        )
    times = [r.summary.escape_time for r in results if r.summary.escaped_plateau]
    print(f"escaped {len(times)}/{len(results)}; median escape t among escaped: "
          f"{np.median(times) if times else float('nan'):.3g}")


if __name__ == "__main__":
    main()
