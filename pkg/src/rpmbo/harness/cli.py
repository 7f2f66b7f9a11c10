"""Command line entry point: run, overfit, msweep, compare, plot."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import RpmboError, UnknownObjectiveError
from .config import ExperimentSpec, OverfitSpec, load_spec, parse_seeds
from .experiment import final_incumbents, m_sweep, plot_svg, read_aggregate, run_experiment
from .overfit import run_overfit_study
from .wilcoxon import wilcoxon_signed_rank


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _add_run_flags(p):
    p.add_argument("--config", help="JSON experiment spec")
    p.add_argument("--objective")
    p.add_argument("--method", choices=["rpmbo", "random-search", "random-embedding"])
    p.add_argument("--seeds", help="e.g. 0-9 or 0,2,4")
    p.add_argument("--budget", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)


def _spec_from(args) -> ExperimentSpec:
    seeds = parse_seeds(args.seeds) if args.seeds else None
    return load_spec(args.config, ExperimentSpec, objective=args.objective, method=args.method,
                     seeds=seeds, budget=args.budget, m=args.m, out=args.out, workers=args.workers)


def cmd_run(args):
    res = run_experiment(_spec_from(args))
    print(f"wrote {res['out']}")
    return 0


def cmd_msweep(args):
    res = m_sweep(_spec_from(args), _int_list(args.ms))
    for m, v in res["final_medians"].items():
        print(f"m={m} final median {v:.6g}")
    return 0


def cmd_overfit(args):
    over = {"objective": args.objective, "sizes": _int_list(args.sizes) if args.sizes else None,
            "repeats": args.repeats, "samples": args.samples, "out": args.out, "seed": args.seed}
    spec = load_spec(args.config, OverfitSpec, **over)
    for r in run_overfit_study(spec):
        print(f"{r['setting']:>15} n={r['size']:<4} {r['mean']:.2f} +- {r['std']:.2f}  (median {r['median']:.2f})")
    return 0


def cmd_compare(args):
    a = final_incumbents(args.a)
    b = final_incumbents(args.b)
    seeds = sorted(set(a) & set(b))
    p = wilcoxon_signed_rank([a[s] for s in seeds], [b[s] for s in seeds])
    print(json.dumps({"pairs": len(seeds), "p_value": p}))
    return 0


def cmd_plot(args):
    series = {Path(p).parent.name or p: read_aggregate(p) for p in args.csv}
    plot_svg(series, args.out, title=args.title or "")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpmbo")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment over several seeds")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("msweep", help="repeat an experiment for several m")
    _add_run_flags(p)
    p.add_argument("--ms", required=True, help="comma separated m values")
    p.set_defaults(func=cmd_msweep)

    p = sub.add_parser("overfit", help="posterior test-error study of trained maps")
    p.add_argument("--config")
    p.add_argument("--objective")
    p.add_argument("--sizes")
    p.add_argument("--repeats", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_overfit)

    p = sub.add_parser("compare", help="one-sided Wilcoxon test of final incumbents, A less than B")
    p.add_argument("a", help="experiment or trace directory A")
    p.add_argument("b", help="experiment or trace directory B")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", help="plot aggregate CSVs into one SVG")
    p.add_argument("csv", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (RpmboError, UnknownObjectiveError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
