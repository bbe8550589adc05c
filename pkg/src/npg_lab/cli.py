"""Command-line entry point: ``npg-lab run | verify | analyze``."""

import argparse
import json
import logging
import sys

import numpy as np

from npg_lab.diagnostics import fit_committal_exponent, fit_rate_slope
from npg_lab.experiments import PRESETS, failure_rate, load_spec, read_trace_csv, run_experiment
from npg_lab.verify import SUITES, run_suite


def _cmd_run(args):
    spec = load_spec(args.spec)
    spec = spec.with_overrides(
        iterations=args.iterations,
        seeds=None if args.n_seeds is None else tuple(range(args.n_seeds)),
    )
    results = run_experiment(spec, out_dir=args.out_dir, seed_base=args.seed_base, threads=args.threads)
    for res in results:
        s = res.summary
        status = "FAILED" if s.failed else "ok"
        print(
            f"seed={s.seed} {status} final={s.final_value:.10g} gap={s.final_gap:.4g} "
            f"min_opt_prob={s.min_opt_prob:.4g} escape_t={s.escape_time} "
            f"monotone_violations={s.monotone_violations}"
        )
    if args.out_dir:
        print(f"wrote {args.out_dir}/{spec.name}/")
    return 0


def _cmd_verify(args):
    records = run_suite(args.suite, seed=args.seed_base)
    text = json.dumps(records, indent=2)
    if args.out_dir:
        from pathlib import Path

        path = Path(args.out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / f"verify_{args.suite}.json").write_text(text + "\n")
    print(text)
    return 0 if all(r["pass"] for r in records) else 1


def _cmd_analyze(args):
    if args.kind == "failure":
        spec = load_spec(args.input)
        frac = failure_rate(
            spec, args.threshold, args.horizon or spec.iterations, args.seed_base, args.threads
        )
        print(json.dumps({"spec": spec.name, "threshold": args.threshold, "failure_rate": frac}))
        return 0
    cols = read_trace_csv(args.input)
    t = cols["t"]
    if args.kind == "slope":
        gap = cols["gap"] if "gap" in cols else cols["gap_rho"]
        lo, hi = args.window if args.window else (t.min(), t.max())
        slope, r2 = fit_rate_slope(t, gap, (lo, hi))
        print(json.dumps({"slope": slope, "r2": r2, "window": [lo, hi]}))
        return 0
    comp = cols["complement"] if "complement" in cols else 1.0 - cols["pi_opt"]
    exponent, model = fit_committal_exponent(t, comp, window=args.window)
    print(json.dumps({"exponent": float(np.round(exponent, 12)), "model": model}))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="npg-lab", description=__doc__)
    p.add_argument("--seed-base", type=int, default=0, help="offset added to every seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a JSON spec")
    run.add_argument("spec", help=f"JSON spec path or one of: {', '.join(PRESETS)}")
    run.add_argument("--iterations", type=int, default=None, help="override the iteration budget")
    run.add_argument("--n-seeds", type=int, default=None, help="use seeds 0..n-1 instead")
    run.set_defaults(func=_cmd_run)

    ver = sub.add_parser("verify", help="run oracle check suites")
    ver.add_argument("--suite", choices=SUITES + ("all",), default="all")
    ver.set_defaults(func=_cmd_verify)

    an = sub.add_parser("analyze", help="fit a slope or committal exponent, or measure failure rates")
    an.add_argument("kind", choices=("slope", "committal", "failure"))
    an.add_argument("--input", required=True, help="trace CSV (slope/committal) or spec (failure)")
    an.add_argument("--window", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    an.add_argument("--threshold", type=float, default=1e-3)
    an.add_argument("--horizon", type=int, default=None)
    an.set_defaults(func=_cmd_analyze)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
