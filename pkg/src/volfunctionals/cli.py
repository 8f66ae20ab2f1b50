"""Command-line front end: ``volfunc simulate|estimate|mc|compare``.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

import argparse
import dataclasses
import os
import sys
import warnings

from .errors import ConfigError, DataError, DomainError, NumericalError
from .estimators import KINDS, estimate, report_csv_header, report_to_csv_row, report_to_text
from .experiment import (
    experiment_from_config,
    run_compare,
    run_mc,
    write_mc_outputs,
    write_rows,
)
from .simkit import model_from_section, read_config, simulate, write_path
from .spotvol import TuningPlan, read_grid_csv, truncation_exponent_lower_bound
from .testfn import parse_function


def _plan_overrides(args, plan):
    changes = {}
    if args.gamma is not None:
        changes["window_exponent"] = args.gamma
    if args.kappa is not None:
        changes["window_const"] = args.kappa
    if args.varpi is not None:
        changes["trunc_exponent"] = args.varpi
    if args.alpha is not None:
        changes["trunc_const"] = args.alpha
    if args.theta is not None:
        changes["theta"] = args.theta
    if args.no_truncation:
        changes["trunc_exponent"] = None
    return dataclasses.replace(plan, **changes) if changes else plan


def _add_plan_flags(p):
    p.add_argument("--gamma", type=float, help="window exponent in (1/3, 1/2)")
    p.add_argument("--kappa", type=float, help="window constant")
    p.add_argument("--varpi", type=float, help="truncation exponent in (0, 1/2)")
    p.add_argument("--alpha", type=float, help="truncation constant")
    p.add_argument("--theta", type=float, help="use k_n = ceil(theta / sqrt(mesh))")
    p.add_argument("--no-truncation", action="store_true")


def cmd_simulate(args):
    cp = read_config(args.config)
    if "model" not in cp:
        raise ConfigError(f"{args.config}: missing [model] section")
    model = model_from_section(cp["model"])
    names = [s.strip() for s in cp.get("experiment", "functions", fallback="").split(";") if s.strip()]
    functions = [parse_function(s, model.dim) for s in names]
    seed = args.seed if args.seed is not None else cp.getint("experiment", "seed", fallback=0)
    path = simulate(model, seed, 0, functions)
    os.makedirs(args.out_dir, exist_ok=True)
    csv_path = os.path.join(args.out_dir, "path.csv")
    write_path(path, csv_path, os.path.join(args.out_dir, "path.truth"))
    print(csv_path)


def cmd_estimate(args):
    grid = read_grid_csv(args.csv)
    g = parse_function(args.function, grid.dim)
    plan = _plan_overrides(args, TuningPlan())
    if plan.trunc_exponent is not None:
        bound = truncation_exponent_lower_bound(g.growth_order, args.jump_activity)
        if plan.trunc_exponent < bound:
            warnings.warn(f"truncation exponent {plan.trunc_exponent} is below the admissible "
                          f"bound {bound:.4f} for p={g.growth_order:g}, r={args.jump_activity:g}")
    report = estimate(g, grid, plan, kind=args.estimator, ci_level=args.ci_level,
                      border_correction=not args.no_border_correction,
                      avar_correction=not args.plain_avar)
    if args.format == "csv":
        print(report_csv_header(report))
        print(report_to_csv_row(report))
    else:
        sys.stdout.write(report_to_text(report))


def _experiment(args):
    spec = experiment_from_config(read_config(args.config))
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    plan = _plan_overrides(args, spec.plan)
    if plan is not spec.plan:
        changes["plan"] = plan
    return dataclasses.replace(spec, **changes) if changes else spec


def cmd_mc(args):
    spec = _experiment(args)
    summary = run_mc(spec, workers=args.workers)
    write_mc_outputs(summary, args.out_dir)
    print(os.path.join(args.out_dir, "summary.csv"))


def cmd_compare(args):
    spec = _experiment(args)
    table, summary = run_compare(spec, workers=args.workers)
    write_mc_outputs(summary, args.out_dir)
    cols = ["function", "n", "var_corrected", "var_baseline", "ratio", "theoretical_ratio"]
    path = os.path.join(args.out_dir, "compare.csv")
    write_rows(path, cols, table)
    print(path)


def build_parser():
    parser = argparse.ArgumentParser(prog="volfunc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one path to CSV plus a truth sidecar")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate V(g)_t from a regular-grid CSV")
    p.add_argument("csv")
    p.add_argument("--function", default="power:p=2")
    p.add_argument("--estimator", default="corrected_overlapping", choices=KINDS)
    p.add_argument("--ci-level", type=float, default=0.95)
    p.add_argument("--no-border-correction", action="store_true")
    p.add_argument("--plain-avar", action="store_true",
                   help="use the uncorrected variance plug-in for the interval")
    p.add_argument("--jump-activity", type=float, default=0.0,
                   help="declared jump activity index r, used to validate --varpi")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    _add_plan_flags(p)
    p.set_defaults(func=cmd_estimate)

    for name, func, text in (("mc", cmd_mc, "replication study"),
                             ("compare", cmd_compare, "variance ratio against the moment baseline")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out-dir", default=".")
        _add_plan_flags(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
