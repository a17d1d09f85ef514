"""Command-line entry point ``acqfam``."""

import argparse
import logging
import os
import sys

from .engine import OptimizerConfig
from .experiment import (
    STATISTICS,
    AcquisitionSpec,
    ExperimentSpec,
    rank_report,
    run_experiment,
    sweep_family,
    summarize,
)
from .testbed import PROBLEMS, get_problem


def _problems(values):
    names = []
    for v in values or []:
        for part in v.split(","):
            part = part.strip()
            if part.lower() == "all":
                names.extend(PROBLEMS)
            elif part:
                names.append(get_problem(part).name)
    return list(dict.fromkeys(names))


def _add_run_options(p):
    p.add_argument("--problem", action="append", required=True,
                   help="problem name (GRL, ROS, MOT, ACY, RAS, HTN) or 'all'; repeatable")
    p.add_argument("--reps", type=int, default=100, help="repetitions per cell (default 100)")
    p.add_argument("--init", type=int, default=10, help="Latin hypercube points (default 10)")
    p.add_argument("--iters", type=int, default=490, help="sequential evaluations (default 490)")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--resume", action="store_true", help="keep completed runs found on disk")
    p.add_argument("--pool-per-dim", type=int, default=OptimizerConfig.pool_per_dim,
                   help="acquisition candidate pool size per input dimension")
    p.add_argument("--refine-steps", type=int, default=OptimizerConfig.refine_steps)
    p.add_argument("--fit-starts", type=int, default=8)
    p.add_argument("--refit-every", type=int, default=1,
                   help="refit hyperparameters every k iterations (default 1)")


def _common(args):
    return {
        "optimizer": OptimizerConfig(pool_per_dim=args.pool_per_dim, refine_steps=args.refine_steps),
        "fit_starts": args.fit_starts,
        "refit_every": args.refit_every,
    }


def print_summary(rows, file=None):
    file = file or sys.stdout
    head = f"{'problem':<8}{'acquisition':<28}{'label':<12}{'n':>5}{'fail':>5}"
    head += "".join(f"{s:>16}" for s in STATISTICS)
    print(head, file=file)
    for r in rows:
        line = f"{r.problem:<8}{r.acquisition:<28}{r.label:<12}{r.repetitions:>5}{r.failures:>5}"
        line += "".join(f"{getattr(r, s):>16.6g}" for s in STATISTICS)
        print(line, file=file)
    print("\nbest per problem and statistic:", file=file)
    for problem, stat, winners, value in rank_report(rows):
        print(f"  {problem:<6}{stat:<15}{winners} ({value:.6g})", file=file)


def cmd_run(args):
    acqs = tuple(AcquisitionSpec.parse(a) for a in args.acq)
    spec = ExperimentSpec(
        problems=tuple(_problems(args.problem)),
        acquisitions=acqs,
        outdir=args.out,
        repetitions=args.reps,
        n_init=args.init,
        n_sequential=args.iters,
        base_seed=args.seed,
        **_common(args),
    )
    rows = run_experiment(spec, workers=args.workers, resume=args.resume)
    print_summary(rows)
    return 1 if any(r.failures for r in rows) else 0


def cmd_sweep(args):
    rows = sweep_family(
        args.group,
        _problems(args.problem),
        args.reps,
        args.init,
        args.iters,
        args.seed,
        args.out,
        workers=args.workers,
        resume=args.resume,
        **_common(args),
    )
    print_summary(rows)
    return 1 if any(r.failures for r in rows) else 0


def cmd_summarize(args):
    print_summary(summarize(args.directory))
    return 0


def cmd_describe(args):
    names = _problems(args.problem) if args.problem else list(PROBLEMS)
    for name in names:
        p = get_problem(name)
        lo, hi = p.bounds[0]
        same = all((b == p.bounds[0]).all() for b in p.bounds)
        box = f"[{lo:g}, {hi:g}]^{p.dimension}" if same else str(p.bounds.tolist())
        if p.open_domain:
            box = f"({lo:g}, {hi:g})^{p.dimension}"
        print(f"{p.name}  {p.title}")
        print(f"  dimension           {p.dimension}")
        print(f"  domain              {box}")
        print(f"  reference minimum   {p.global_minimum_value:g}")
        print(f"  local minima        {p.local_minima}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="acqfam", description="Bayesian optimization benchmarks for the improvement-based acquisition family."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Monte Carlo runs for chosen problems and acquisitions")
    _add_run_options(p)
    p.add_argument("--acq", action="append", required=True,
                   help="preset (EI, PEI, PI, SEI, VEI, UEI) or 'u,v,w,beta'; repeatable")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="one of the three family parameter sweeps")
    p.add_argument("--group", type=int, choices=(1, 2, 3), required=True)
    _add_run_options(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("summarize", help="recompute summary tables from trace files")
    p.add_argument("directory")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("describe", help="print problem dimensions, domains and reference minima")
    p.add_argument("--problem", action="append")
    p.set_defaults(func=cmd_describe)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (KeyError, ValueError, FileNotFoundError) as err:
        msg = err.args[0] if isinstance(err, KeyError) and err.args else err
        print(f"acqfam: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
