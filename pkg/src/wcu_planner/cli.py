"""Command-line interface.

Commands mirror the pipeline stages: ``generate-network`` writes a grid
network file, ``candidates``/``surrogate`` run pipeline prefixes,
``pipeline`` runs everything through the comparison artifact, and
``report`` renders the artifacts in an output directory.  Exit status is
0 on success, 1 on a planning error (message on stderr), 2 on usage
errors.  Set ``WCU_PLANNER_LOG`` to a level name (e.g. ``INFO``) to see
stage progress.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .model import (
    GridDefaults,
    PlannerError,
    generate_grid_network,
    load_scenario,
    save_network,
)
from .pipeline import load_inputs, run_pipeline
from .report import write_report

log = logging.getLogger(__name__)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _add_pipeline_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--network", required=True, type=Path,
                     help="network JSON file")
    sub.add_argument("--scenario", required=True, type=Path,
                     help="scenario JSON file")
    sub.add_argument("--out", required=True, type=Path,
                     help="artifact output directory")
    sub.add_argument("--seed", type=int, default=None,
                     help="override the scenario seed")
    sub.add_argument("--jobs", type=_positive_int, default=1,
                     help="worker processes for surrogate sampling")
    sub.add_argument("--force", action="store_true",
                     help="recompute every stage, ignoring cached artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wcu-planner",
        description="Plan wireless charging unit placement and signal timing.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser(
        "generate-network",
        help="write a rows-by-cols signalized grid network file")
    gen.add_argument("--rows", required=True, type=_positive_int)
    gen.add_argument("--cols", required=True, type=_positive_int)
    gen.add_argument("--out", required=True, type=Path,
                     help="destination network JSON file")
    gen.add_argument("--scenario", type=Path, default=None,
                     help="scenario file supplying grid geometry and demand")

    for name, summary in (
        ("candidates", "run through candidate-lane selection"),
        ("surrogate", "run through surrogate fitting"),
        ("pipeline", "run every stage through the comparison artifact"),
    ):
        sub = commands.add_parser(name, help=summary)
        _add_pipeline_args(sub)

    rep = commands.add_parser(
        "report", help="render summary.txt and plots/ from artifacts")
    rep.add_argument("--out", required=True, type=Path,
                     help="directory holding pipeline artifacts")
    return parser


def _cmd_generate_network(args: argparse.Namespace) -> int:
    defaults = GridDefaults()
    if args.scenario is not None:
        defaults = load_scenario(args.scenario).grid
    net = generate_grid_network(args.rows, args.cols, defaults)
    save_network(net, args.out)
    print(f"wrote {args.out}: {len(net.nodes)} nodes, {len(net.links)} links, "
          f"{sum(len(l.lanes) for l in net.links.values())} lanes, "
          f"{len(net.signals)} signalized intersections")
    return 0


def _cmd_stage(args: argparse.Namespace, upto: str) -> int:
    net, scenario = load_inputs(args.network, args.scenario, seed=args.seed)
    result = run_pipeline(net, scenario, args.out, jobs=args.jobs,
                          force=args.force, upto=upto)
    if upto == "candidates" or result.status == "no_candidates":
        lanes = result.payloads["candidates"]["lanes"]
        print(f"candidates: {len(lanes)}")
        for lane in lanes:
            print(f"  {lane}")
        if result.status == "no_candidates" and upto != "candidates":
            print("status: no_candidates")
        return 0
    if upto == "surrogate":
        n = len(result.payloads["surrogate"]["lanes"])
        print(f"fitted surrogates for {n} lane(s) into {result.paths['surrogate']}")
        return 0
    compare = result.payloads["compare"]
    print("status: ok")
    print(f"optimized rate: {compare['optimized']['utility_rate_wh_per_h']:.1f} Wh/h")
    print(f"baseline rate:  {compare['baseline']['utility_rate_wh_per_h']:.1f} Wh/h")
    ratio = compare["utility_ratio"]
    print(f"utility ratio:  {ratio:.3f}" if ratio is not None
          else "utility ratio:  undefined (baseline rate is 0)")
    print(f"constraint audit: {'PASS' if compare['audit']['ok'] else 'FAIL'}")
    print(f"artifacts: {args.out}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    written = write_report(args.out)
    for path in written:
        print(f"wrote {path}")
    return 0


def configure_logging() -> None:
    name = os.environ.get("WCU_PLANNER_LOG", "WARNING").upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on usage errors and --help
        return int(exc.code or 0)
    try:
        if args.command == "generate-network":
            return _cmd_generate_network(args)
        if args.command in ("candidates", "surrogate"):
            return _cmd_stage(args, args.command)
        if args.command == "pipeline":
            return _cmd_stage(args, "compare")
        if args.command == "report":
            return _cmd_report(args)
    except PlannerError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command!r}")


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
