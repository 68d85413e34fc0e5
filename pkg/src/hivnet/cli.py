"""Command-line entry point: ``hivnet simulate | resume | compare | netgen``.

Exit codes: 0 success, 1 usage or config error, 2 runtime error,
3 comparison rejected at the requested significance level.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import checkpoint as ckpt
from . import engine
from .io import (
    ConfigError,
    export_csv,
    export_dot,
    export_graphml,
    load_config,
    read_series_csv,
)
from .network import build_network
from .params import ModelParams
from .stats import chi_square_compare
from .stochastic import Purpose, RandomStream

log = logging.getLogger("hivnet")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_REJECTED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hivnet", description="HIV spread on an evolving MSM contact network")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run an ensemble and write CSV series")
    sim.add_argument("--config", type=Path)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--runs", type=int, help="ensemble size (default 24)")
    sim.add_argument("--start-year", type=int)
    sim.add_argument("--end-year", type=int)
    sim.add_argument("--out", type=Path, default=Path("out"))
    sim.add_argument("--snapshot-every", type=int, default=0, metavar="K",
                     help="write GraphML network snapshots every K years (0 = off)")
    sim.add_argument("--checkpoint-every", type=int, default=0, metavar="K",
                     help="write restartable checkpoints every K years (0 = off)")
    sim.add_argument("--stats-interval", type=int)
    sim.add_argument("--workers", type=int, default=1)

    res = sub.add_parser("resume", help="continue a run from a checkpoint file")
    res.add_argument("--from", dest="source", type=Path, required=True, metavar="SNAPSHOT")
    res.add_argument("--end-year", type=int)
    res.add_argument("--out", type=Path, default=Path("out"))
    res.add_argument("--checkpoint-every", type=int, default=0, metavar="K")

    cmp_ = sub.add_parser("compare", help="chi-square test of a simulated series against a reference")
    cmp_.add_argument("--sim", type=Path, required=True)
    cmp_.add_argument("--ref", type=Path, required=True)
    cmp_.add_argument("--alpha", type=float, default=0.05)
    cmp_.add_argument("--column", help="column of --sim to test (default incidence or incidence_mean)")

    gen = sub.add_parser("netgen", help="build the initial network only and export it")
    gen.add_argument("--config", type=Path)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out", type=Path, required=True, metavar="GRAPHML")
    gen.add_argument("--dot", type=Path, help="also write a DOT file")
    return parser


def _params_from_args(args) -> ModelParams:
    params = load_config(args.config) if getattr(args, "config", None) else ModelParams()
    overrides = {}
    for flag, name in (("seed", "seed"), ("runs", "n_runs"), ("start_year", "start_year"),
                       ("end_year", "end_year"), ("stats_interval", "stats_interval")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        try:
            params = params.replace(**overrides)
        except (KeyError, ValueError) as exc:
            raise UsageError(str(exc)) from exc
    return params


def _year_hook(out: Path, run_index: int, snapshot_every: int, checkpoint_every: int):
    def hook(state: engine.SimulationState, t: int) -> None:
        year = state.calendar_year(t)
        if snapshot_every and t % snapshot_every == 0:
            (out / "snapshots").mkdir(parents=True, exist_ok=True)
            export_graphml(state.network, out / "snapshots" / f"run{run_index:03d}_{year}.graphml")
        if checkpoint_every and t > 0 and t % checkpoint_every == 0:
            (out / "checkpoints").mkdir(parents=True, exist_ok=True)
            ckpt.checkpoint(state, out / "checkpoints" / f"run{run_index:03d}_{year}.ckpt")
    return hook


def cmd_simulate(args) -> int:
    params = _params_from_args(args)
    if args.snapshot_every < 0 or args.checkpoint_every < 0 or args.workers < 1:
        raise UsageError("--snapshot-every/--checkpoint-every must be >= 0 and --workers >= 1")
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    seed, n_runs = params.run.seed, params.run.n_runs
    if args.snapshot_every or args.checkpoint_every:
        logs = []
        for i in range(n_runs):
            state = engine.new_state(params, i, seed)
            engine.run(state, params.run.end_year,
                       _year_hook(out, i, args.snapshot_every, args.checkpoint_every))
            logs.append(state.stats_log)
        result = engine.aggregate(logs)
    else:
        result = engine.run_ensemble(params, n_runs, seed, workers=args.workers)
    for i, log_ in enumerate(result.runs):
        export_csv(log_, out / f"run{i:03d}.csv")
    export_csv(result, out / "ensemble.csv")
    log.info("wrote %d run files and ensemble.csv to %s", n_runs, out)
    return EXIT_OK


def cmd_resume(args) -> int:
    state = ckpt.restore(args.source)
    end_year = args.end_year if args.end_year is not None else state.params.run.end_year
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    engine.run(state, end_year, _year_hook(out, state.run_index, 0, args.checkpoint_every))
    path = out / f"run{state.run_index:03d}.csv"
    export_csv(state.stats_log, path)
    log.info("resumed run %d through %d -> %s", state.run_index, end_year, path)
    return EXIT_OK


def cmd_compare(args) -> int:
    column = args.column
    if column is None:
        with open(args.sim, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        column = "incidence_mean" if "incidence_mean" in header else "incidence"
    simulated = read_series_csv(args.sim, column)
    reference = read_series_csv(args.ref)
    result = chi_square_compare(simulated, reference, args.alpha)
    verdict = "accept" if result.accept else "reject"
    print(f"statistic={result.statistic:.6f} dof={result.degrees_of_freedom} "
          f"critical={result.critical_value:.6f} p={result.p_value:.6f} {verdict}")
    return EXIT_OK if result.accept else EXIT_REJECTED


def cmd_netgen(args) -> int:
    params = _params_from_args(args)
    stream = RandomStream(params.run.seed, 0, Purpose.BUILD)
    network = build_network(params.network, params.run.start_year,
                            params.run.initial_positive_count, stream, params.cascade)
    export_graphml(network, args.out)
    if args.dot:
        export_dot(network, args.dot)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "resume": cmd_resume, "compare": cmd_compare,
            "netgen": cmd_netgen}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError) as exc:
        print(f"hivnet: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, OSError, ckpt.SnapshotError, engine.SimulationError,
            engine.EnsembleError) as exc:
        print(f"hivnet: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
