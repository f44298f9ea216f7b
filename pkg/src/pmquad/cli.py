"""Command-line interface.

Subcommands: constants, moments, second-moment, simulate-cost, profile,
simulate-limit, experiment, diagnostics.  Global flags (before the
subcommand): --seed, --threads, --out, --format, --config.

Exit codes: 0 success, 2 invalid arguments, 3 cap exceeded, 4 acceptance
check failed (experiment --check).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import kdtree, limitproc, quadtree
from .errors import CapExceededError
from .harness import (
    EXPERIMENT_KINDS,
    ExperimentSpec,
    Table,
    emit_csv,
    emit_plot_data,
    run_check,
    run_experiment,
)
from .moments import make_grid, psi_moments, second_moment_iterates, xi_perp_moments
from .specfun import constants

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CAP = 3
EXIT_CHECK_FAILED = 4


def _read_config(path: str) -> dict:
    """One `key = value` per line; '#' starts a comment."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {raw.strip()!r}")
            k, v = (part.strip() for part in line.split("=", 1))
            out[k] = v
    return out


def _add_global_args(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="master seed (default 0)")
    p.add_argument("--threads", type=int, default=d(1),
                   help="worker processes for experiments (default 1; output is "
                        "byte-identical for any value)")
    p.add_argument("--out", default=d("-"), help="output path, '-' for stdout (default)")
    p.add_argument("--format", choices=("csv", "plot"), default=d("csv"),
                   help="csv or gnuplot-style plot data (default csv)")
    p.add_argument("--config", default=d(None),
                   help="optional key=value file supplying defaults; flags win")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pmquad",
        description="Partial-match query costs in random quadtrees and 2-d trees.",
    )
    _add_global_args(p, suppress=False)
    # the same flags are accepted after the subcommand and override the globals
    common = argparse.ArgumentParser(add_help=False)
    _add_global_args(common, suppress=True)
    sub = p.add_subparsers(dest="command", required=True, parser_class=argparse.ArgumentParser)

    sub.add_parser("constants", parents=[common],
                   help="print every closed-form constant as name,value")

    mom = sub.add_parser("moments", parents=[common],
                         help="moment sequence c_m of the limit marginal")
    mom.add_argument("--max-order", type=int, default=12)
    mom.add_argument("--family", choices=("psi", "xiperp"), default="psi")

    sm = sub.add_parser("second-moment", parents=[common], help="iterates of the second-moment operator")
    sm.add_argument("--iters", type=int, default=3)
    sm.add_argument("--grid", type=int, default=512)

    sc = sub.add_parser("simulate-cost", parents=[common], help="replicated partial-match costs")
    sc.add_argument("--n", type=int, default=1000, help="points per tree")
    sc.add_argument("--s", type=float, default=None,
                    help="fixed query position (default: fresh uniform per replication)")
    sc.add_argument("--poisson", type=float, default=None, metavar="T",
                    help="Poissonize: draw the size as Poisson(T) instead of --n")
    sc.add_argument("--tree", choices=("quad", "kd"), default="quad")
    sc.add_argument("--root-axis", choices=("v", "h"), default="v")
    sc.add_argument("--replications", type=int, default=100)

    pr = sub.add_parser("profile", parents=[common], help="exact cost profile of one random tree")
    pr.add_argument("--n", type=int, default=100)
    pr.add_argument("--tree", choices=("quad", "kd"), default="quad")
    pr.add_argument("--root-axis", choices=("v", "h"), default="v")

    sl = sub.add_parser("simulate-limit", parents=[common], help="limit-process approximant Z_n")
    sl.add_argument("--depth", type=int, default=10)
    sl.add_argument("--grid", type=int, default=512,
                    help="grid size for one path realization")
    sl.add_argument("--variant", choices=("quad", "kd"), default="quad")
    sl.add_argument("--replications", type=int, default=None,
                    help="with --s: emit replicated pointwise values instead of a path")
    sl.add_argument("--s", type=float, default=0.5)

    dg = sub.add_parser("diagnostics", parents=[common], help="geometric diagnostics W_n, L_n (and "
                                            "optionally the fill-up level)")
    dg.add_argument("--depth", type=int, default=6)
    dg.add_argument("--replications", type=int, default=100)
    dg.add_argument("--fill-n", type=int, default=None,
                    help="also build a random quadtree of this size per replication "
                         "and report its fill-up level")

    ex = sub.add_parser("experiment", parents=[common], help="seeded Monte Carlo experiment")
    ex.add_argument("--kind", required=True, choices=sorted(EXPERIMENT_KINDS))
    ex.add_argument("--n", type=int, nargs="*", default=[], help="tree sizes")
    ex.add_argument("--t", type=float, default=100.0, help="Poisson time budget")
    ex.add_argument("--replications", type=int, default=100)
    ex.add_argument("--s", type=float, default=0.5)
    ex.add_argument("--s-grid", type=float, nargs="*", default=[])
    ex.add_argument("--depth", type=int, default=10)
    ex.add_argument("--eps", type=float, default=0.1)
    ex.add_argument("--variant", choices=("quad", "kd"), default="quad")
    ex.add_argument("--check", action="store_true",
                    help="evaluate the kind's acceptance bound; exit 4 on failure")
    ex.add_argument("--tol-scale", type=float, default=1.0,
                    help="scale every --check tolerance (diagnostics use only)")
    return p


def _apply_config(parser: argparse.ArgumentParser, argv) -> list:
    """Config supplies defaults as `--key value` pairs prepended to argv."""
    if "--config" not in argv:
        return list(argv)
    idx = argv.index("--config")
    cfg = _read_config(argv[idx + 1])
    injected = []
    for k, v in cfg.items():
        injected.extend([f"--{k.replace('_', '-')}", v])
    # injected flags go first so explicit flags override them
    return injected + list(argv)


def _cmd_constants(args) -> Table:
    rows = constants().as_rows()
    return Table(columns=["name", "value"], rows=rows, meta={})


def _cmd_moments(args) -> Table:
    fn = psi_moments if args.family == "psi" else xi_perp_moments
    table = fn(args.max_order)
    rows = [(m, table.c(m)) for m in range(1, args.max_order + 1)]
    return Table(columns=["m", "c_m"], rows=rows, meta={"family": args.family})


def _cmd_second_moment(args) -> Table:
    gf = second_moment_iterates(args.iters, make_grid(args.grid))
    rows = list(zip(gf.grid.tolist(), gf.values.tolist()))
    return Table(columns=["s", "m_n"], rows=rows, meta={"iters": args.iters})


def _cmd_simulate_cost(args) -> Table:
    rows = []
    for r in range(args.replications):
        rng = np.random.default_rng([args.seed, r])
        if args.poisson is not None:
            n = int(rng.poisson(args.poisson))
        else:
            n = args.n
        xs, ys = quadtree.sample_uniform_xy(n, rng)
        s = args.s if args.s is not None else float(rng.random())
        if args.tree == "quad":
            value = quadtree.line_cost(xs, ys, s)
        else:
            axis = kdtree.VERTICAL if args.root_axis == "v" else kdtree.HORIZONTAL
            value = kdtree.line_cost(xs, ys, s, axis)
        rows.append((r, value))
    meta = {"seed": args.seed, "tree": args.tree, "generator": "pcg64"}
    return Table(columns=["replication", "cost"], rows=rows, meta=meta)


def _cmd_profile(args) -> Table:
    rng = np.random.default_rng([args.seed, 0])
    pts = quadtree.sample_uniform_points(args.n, rng)
    if args.tree == "quad":
        prof = quadtree.profile(quadtree.build(pts))
    else:
        axis = kdtree.VERTICAL if args.root_axis == "v" else kdtree.HORIZONTAL
        prof = kdtree.kd_profile(kdtree.build_kd(pts, axis))
    rows = list(zip(prof.breakpoints, prof.values))
    return Table(columns=["breakpoint", "value"], rows=rows, meta={"seed": args.seed})


def _cmd_simulate_limit(args) -> Table:
    two_d = args.variant == "kd"
    if args.replications is not None:
        vals = limitproc.simulate_many(
            args.depth, args.s, args.seed, args.replications, two_d=two_d
        )
        rows = list(enumerate(vals.tolist()))
        return Table(columns=["replication", "value"],
                     rows=rows, meta={"seed": args.seed, "depth": args.depth})
    grid = np.linspace(0.0, 1.0, args.grid)
    env = limitproc.LimitEnvironment(limitproc.env_seed(args.seed, 0))
    vals = limitproc.simulate_path(args.depth, grid, env, two_d=two_d)
    rows = list(zip(grid.tolist(), vals.tolist()))
    return Table(columns=["s", "z_n"], rows=rows,
                 meta={"seed": args.seed, "depth": args.depth})


def _cmd_diagnostics(args) -> Table:
    rows = []
    columns = ["replication", "wn", "ln"]
    if args.fill_n is not None:
        columns.append("fillup")
    for r in range(args.replications):
        env = limitproc.LimitEnvironment(limitproc.env_seed(args.seed, r))
        wn, ln = limitproc.diagnostics(args.depth, env)
        row = [r, wn, ln]
        if args.fill_n is not None:
            rng = np.random.default_rng([args.seed, r])
            tree = quadtree.build(quadtree.sample_uniform_points(args.fill_n, rng))
            row.append(limitproc.fill_up_level(tree))
        rows.append(tuple(row))
    return Table(columns=columns, rows=rows, meta={"seed": args.seed, "depth": args.depth})


def _cmd_experiment(args) -> tuple:
    spec = ExperimentSpec(
        kind=args.kind,
        sizes=tuple(args.n),
        t=args.t,
        replications=args.replications,
        s=args.s,
        s_grid=tuple(args.s_grid),
        seed=args.seed,
        depth=args.depth,
        eps=args.eps,
        variant=args.variant,
    )
    table = run_experiment(spec, threads=args.threads)
    failures = run_check(spec, table, args.tol_scale) if args.check else []
    return table, failures


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        argv = _apply_config(parser, argv)
    except (OSError, ValueError) as exc:
        parser.exit(EXIT_USAGE, f"config error: {exc}\n")
    args = parser.parse_args(argv)

    failures = []
    try:
        if args.command == "constants":
            table = _cmd_constants(args)
        elif args.command == "moments":
            table = _cmd_moments(args)
        elif args.command == "second-moment":
            table = _cmd_second_moment(args)
        elif args.command == "simulate-cost":
            table = _cmd_simulate_cost(args)
        elif args.command == "profile":
            table = _cmd_profile(args)
        elif args.command == "simulate-limit":
            table = _cmd_simulate_limit(args)
        elif args.command == "diagnostics":
            table = _cmd_diagnostics(args)
        elif args.command == "experiment":
            table, failures = _cmd_experiment(args)
        else:  # pragma: no cover - argparse enforces the choices
            parser.error(f"unknown command {args.command!r}")
    except CapExceededError as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE

    emit = emit_csv if args.format == "csv" else emit_plot_data
    if args.out == "-":
        emit(table, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            emit(table, fh)

    if failures:
        for msg in failures:
            print(f"check failed: {msg}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
