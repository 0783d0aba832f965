"""Command-line front end: ``boafi run``, ``boafi sweep`` and ``boafi plot``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import tempfile
from dataclasses import fields, replace
from pathlib import Path
from typing import List, Optional, Sequence

from .bayesnet import Metric, ScoreParams
from .core import derive_stream
from .engine import Termination, Tournament, Truncation, run_boa
from .experiments import (
    DESK_GRID,
    PAPER_GRID,
    RUNS_PER_PROBE,
    SweepRow,
    experiment_config,
    run_experiment,
    sweep_proportions,
    with_speedup,
)
from .plotting import aggregate, render_speedup_png, render_speedup_svg
from .problems import PROBLEMS, make_problem

HEADER = [f.name for f in fields(SweepRow)]


def _proportion(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0 <= value < 1:
        raise argparse.ArgumentTypeError("proportion must lie in [0, 1)")
    return value


def _grid(text: str):
    if text == "paper":
        return PAPER_GRID
    if text == "desk":
        return DESK_GRID
    return tuple(_proportion(part) for part in text.split(",") if part.strip())


def _selection(text: str):
    name, _, arg = text.partition(":")
    try:
        if name == "truncation":
            return Truncation(float(arg)) if arg else Truncation()
        if name == "tournament":
            return Tournament(int(arg)) if arg else Tournament()
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    raise argparse.ArgumentTypeError("expected truncation[:tau] or tournament:<size>")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boafi", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--problem", choices=sorted(PROBLEMS), default="onemax")
        p.add_argument("--n", type=_positive, help="string length (default 50, or 40 for trap4)")
        p.add_argument("--seed", type=int, default=42, help="master seed")
        p.add_argument("--metric", choices=[m.value for m in Metric], default=Metric.BDE.value)
        p.add_argument("--selection", type=_selection, default=Truncation(),
                       help="truncation[:tau] or tournament:<size>")
        p.add_argument("--termination", choices=[t.value for t in Termination],
                       default=Termination.CONVERGED.value)
        p.add_argument("--runs", type=_positive, default=RUNS_PER_PROBE,
                       help="runs per bisection probe")
        p.add_argument("--out", help="output CSV path (default: standard output)")

    run = sub.add_parser("run", help="one experiment (bisection) at a single proportion")
    common(run)
    run.add_argument("--proportion", type=_proportion, default=0.0)
    run.add_argument("--population", type=_positive,
                     help="skip bisection; do --runs BOA runs at this population size")

    sweep = sub.add_parser("sweep", help="experiments over a grid of proportions")
    common(sweep)
    sweep.add_argument("--grid", type=_grid, default=DESK_GRID,
                       help="'paper', 'desk' or a comma separated list of proportions")
    sweep.add_argument("--experiments", type=_positive, default=10)
    sweep.add_argument("--paper", action="store_true",
                       help="28-point grid with 30 experiments per point")
    sweep.add_argument("--no-figures", action="store_true",
                       help="write only the CSV, not the SVG and PNG next to it")

    plot = sub.add_parser("plot", help="render figures from sweep CSV files")
    plot.add_argument("--in", dest="inputs", action="append", required=True,
                      help="sweep CSV (repeatable)")
    plot.add_argument("--out", required=True, help="SVG path; a PNG is written alongside")
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "plot":
        return args
    default = make_problem(args.problem)
    if args.n is None:
        args.n = default.n
    if args.n % default.k:
        parser.error(f"{args.problem} needs n divisible by {default.k}, got {args.n}")
    if args.command == "sweep" and args.paper:
        args.grid = PAPER_GRID
        args.experiments = 30
    if args.command == "sweep" and not args.grid:
        parser.error("empty grid")
    return args


def write_csv(rows: Sequence[SweepRow], path) -> None:
    """Write rows atomically: the target appears only once fully written."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent if str(target.parent) else ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            _write_rows(rows, fh)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_rows(rows, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(HEADER)
    for r in rows:
        writer.writerow([r.problem, r.n, repr(float(r.proportion)), r.experiment, r.seed,
                         r.min_population, repr(float(r.mean_actual_evaluations)),
                         "" if r.speedup is None else repr(float(r.speedup))])


def read_csv(path) -> List[SweepRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [SweepRow(problem, int(n), float(p), int(e), int(seed), int(N), float(evals),
                         float(s) if s else None)
                for problem, n, p, e, seed, N, evals, s in reader]


def _config(args):
    return replace(experiment_config(), selection=args.selection,
                   score=ScoreParams(Metric(args.metric)),
                   termination=Termination(args.termination))


def _figures(rows, svg_path: Path) -> None:
    agg = aggregate(rows)
    render_speedup_svg(agg, svg_path)
    render_speedup_png(agg, svg_path.with_suffix(".png"))


def _cmd_run(args) -> int:
    problem = make_problem(args.problem, args.n)
    cfg = replace(_config(args), inheritance_proportion=args.proportion)
    if args.population is not None:
        cfg = replace(cfg, population_size=args.population)
        out = open(args.out, "w", newline="") if args.out else sys.stdout
        try:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(["run", "succeeded", "actual_evaluations", "generations", "best_true_fitness"])
            for run in range(args.runs):
                s = run_boa(cfg, problem, derive_stream(args.seed, (args.population, run)))
                writer.writerow([run, int(s.succeeded), s.actual_evaluations, s.generations_run,
                                 repr(float(s.best_true_fitness))])
        finally:
            if out is not sys.stdout:
                out.close()
        return 0
    row = run_experiment(problem, args.proportion, args.seed, cfg, runs_per_probe=args.runs)
    if args.out:
        write_csv([row], args.out)
    else:
        _write_rows([row], sys.stdout)
    return 0


def _cmd_sweep(args) -> int:
    problem = make_problem(args.problem, args.n)
    rows = sweep_proportions(problem, args.grid, args.experiments, args.seed, _config(args),
                             runs_per_probe=args.runs)
    if 0.0 in args.grid:
        rows = with_speedup(rows)
    if not args.out:
        _write_rows(rows, sys.stdout)
        return 0
    write_csv(rows, args.out)
    if not args.no_figures and 0.0 in args.grid:
        _figures(rows, Path(args.out).with_suffix(".svg"))
    return 0


def _cmd_plot(args) -> int:
    rows = [row for path in args.inputs for row in read_csv(path)]
    if not rows:
        raise ValueError("input CSV has no rows")
    svg = Path(args.out)
    agg = aggregate(rows)
    render_speedup_svg(agg, svg)
    render_speedup_png(agg, svg.with_suffix(".png"))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")
    handler = {"run": _cmd_run, "sweep": _cmd_sweep, "plot": _cmd_plot}[args.command]
    try:
        return handler(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"boafi: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
