"""Forced-sampling committal exponents and no-baseline failure rates."""

import argparse

from npg_lab.bandit import BanditInstance
from npg_lab.diagnostics import fit_committal_exponent
from npg_lab.experiments import committal_trace, failure_rate, preset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--horizon", type=int, default=10**5)
    ap.add_argument("--threshold", type=float, default=1e-3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    inst = BanditInstance.deterministic([1.0, 0.0])
    t, comp = committal_trace(inst, 0, baseline=False, eta=1.0, iterations=300)
    print("no baseline, forced a*:", fit_committal_exponent(t, comp, window=(10, 200)))
    t, comp = committal_trace(inst, 0, baseline=True, eta=1.0, iterations=10**6)
    print("baseline, forced a*:   ", fit_committal_exponent(t, comp, window=(1e3, 1e6)))

    for name in ("failure-no-baseline", "failure-baseline"):
        spec = preset(name).with_overrides(seeds=tuple(range(args.seeds)))
        frac = failure_rate(spec, args.threshold, args.horizon, threads=args.threads)
        print(f"{name}: {frac:.3f} of {args.seeds} seeds end with pi(a*) < {args.threshold}")


if __name__ == "__main__":
    main()
