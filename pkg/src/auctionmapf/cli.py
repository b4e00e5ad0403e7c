"""Command-line interface.

Subcommands:
  run <config>           run an experiment sweep, writing CSV artifacts
  scenario gen|show ...  build a scenario; gen prints JSON, show prints ASCII
  auction demo ...       run one auction from explicit bids
  sweep-utility <config> emit utility-vs-bid curve data

Exit codes: 0 success, 2 config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from . import harness
from .auction import Bid, RewardSchedule, harmonic_schedule, run_auction
from .world import ScenarioError, grid_to_ascii, make_scenario, scenario_to_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="auctionmapf")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a config file")
    run_p.add_argument("config")
    run_p.add_argument("--out", help="output directory (overrides config)")
    run_p.add_argument("--jobs", type=int, help="parallel trial workers")
    run_p.add_argument("--trials", type=int, help="override trials per point")
    run_p.add_argument("--timeout", type=float, help="override per-trial timeout (s)")

    scen_p = sub.add_parser("scenario", help="generate or display scenarios")
    scen_p.add_argument("action", choices=["gen", "show"])
    scen_p.add_argument("kind")
    scen_p.add_argument("--width", type=int, default=10)
    scen_p.add_argument("--height", type=int, default=10)
    scen_p.add_argument("--agents", type=int, default=2)
    scen_p.add_argument("--gap", type=int, default=1)
    scen_p.add_argument("--obstacles", type=int, default=0)
    scen_p.add_argument("--incentive-min", type=int, default=1)
    scen_p.add_argument("--incentive-max", type=int, default=3)
    scen_p.add_argument("--seed", type=int, default=0)

    auc_p = sub.add_parser("auction", help="auction utilities")
    auc_p.add_argument("action", choices=["demo"])
    auc_p.add_argument("--bids", required=True, help="comma-separated bid amounts")
    auc_p.add_argument("--schedule", help="comma-separated per-turn rewards (default 1/q)")

    sweep_p = sub.add_parser("sweep-utility", help="utility-vs-bid curve data")
    sweep_p.add_argument("config")
    sweep_p.add_argument("--out", help="output directory (overrides config)")
    return parser


def _load_config(path: str, args) -> harness.ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise _CLIError(EXIT_IO, f"cannot read config: {exc}")
    try:
        cfg = harness.parse_config(text)
    except harness.ConfigError as exc:
        raise _CLIError(EXIT_CONFIG, f"config error: {exc}")
    if getattr(args, "trials", None):
        cfg.trials = args.trials
    if getattr(args, "timeout", None):
        cfg.timeout = args.timeout
    if getattr(args, "jobs", None):
        cfg.jobs = args.jobs
    try:
        cfg.validate()
    except harness.ConfigError as exc:
        raise _CLIError(EXIT_CONFIG, f"config error: {exc}")
    return cfg


class _CLIError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _cmd_run(args) -> int:
    cfg = _load_config(args.config, args)
    try:
        records = harness.run_experiment(cfg, out_dir=args.out)
    except OSError as exc:
        raise _CLIError(EXIT_IO, f"cannot write results: {exc}")
    print(f"wrote {len(records)} trial records")
    return EXIT_OK


def _cmd_scenario(args) -> int:
    try:
        scenario = make_scenario(
            args.kind,
            width=args.width,
            height=args.height,
            n_agents=args.agents,
            gap_size=args.gap,
            incentive_range=(args.incentive_min, args.incentive_max),
            rng_seed=args.seed,
            n_obstacles=args.obstacles,
        )
    except ScenarioError as exc:
        raise _CLIError(EXIT_CONFIG, f"scenario error: {exc}")
    if args.action == "gen":
        print(scenario_to_json(scenario))
    else:
        print(grid_to_ascii(scenario.grid))
        for a in scenario.agents:
            print(f"agent {a.id}: start {a.pos} goal {a.goal} incentive {a.incentive}")
    return EXIT_OK


def _parse_fractions(text: str) -> list[Fraction]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "/" in part:
            num, den = part.split("/")
            out.append(Fraction(int(num), int(den)))
        else:
            out.append(Fraction(part))
    return out


def _cmd_auction(args) -> int:
    try:
        amounts = _parse_fractions(args.bids)
    except (ValueError, ZeroDivisionError) as exc:
        raise _CLIError(EXIT_CONFIG, f"bad bids: {exc}")
    if len(amounts) < 2:
        raise _CLIError(EXIT_CONFIG, "need at least two bids")
    bids = [Bid(i, amount) for i, amount in enumerate(amounts)]
    if args.schedule:
        try:
            schedule = RewardSchedule(tuple(_parse_fractions(args.schedule)))
        except ValueError as exc:
            raise _CLIError(EXIT_CONFIG, f"bad schedule: {exc}")
    else:
        schedule = harmonic_schedule(len(bids))
    outcome = run_auction(bids, schedule=schedule)
    order = outcome.turn_order()
    print("turn order (agent ids):", order)
    print("turns:", {aid: outcome.ordering[aid] for aid in sorted(outcome.ordering)})
    print("payments:", {aid: str(outcome.payments[aid]) for aid in sorted(outcome.payments)})
    print("utilities:", {aid: str(outcome.utilities[aid]) for aid in sorted(outcome.utilities)})
    print("welfare:", str(outcome.welfare))
    return EXIT_OK


def _cmd_sweep_utility(args) -> int:
    cfg = _load_config(args.config, args)
    try:
        rows = harness.sweep_utility_experiment(cfg, out_dir=args.out)
    except OSError as exc:
        raise _CLIError(EXIT_IO, f"cannot write results: {exc}")
    print(f"wrote {len(rows)} utility-curve points")
    return EXIT_OK


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "scenario":
            return _cmd_scenario(args)
        if args.command == "auction":
            return _cmd_auction(args)
        if args.command == "sweep-utility":
            return _cmd_sweep_utility(args)
        return EXIT_CONFIG
    except _CLIError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
