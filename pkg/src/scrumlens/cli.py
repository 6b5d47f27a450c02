"""Command-line entry point.

Exit codes: 0 success, 2 usage error or missing file, 3 data validation error,
4 forge/transport/auth error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import analysis, forge, measurements, report, store, survey, synth
from .errors import DataError, ForgeError, WindowLookupError

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_FORGE = 4

log = logging.getLogger("scrumlens")


class UsageError(Exception):
    pass


def _existing(path: str | None, what: str) -> Path:
    if path is None:
        raise UsageError(f"{what} is required")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {path}")
    return p


def cmd_ingest(args: argparse.Namespace) -> int:
    if not args.repo:
        raise UsageError("--repo is required")
    paths = forge.fetch_forge(args.repo, args.out, token=os.environ.get(forge.TOKEN_ENV), since=args.since)
    for name, p in paths.items():
        print(f"{name}: {p}")
    return 0


def _load_dataset(args: argparse.Namespace) -> store.ProjectDataset:
    archives = _existing(args.archives, "--archives")
    windows = _existing(args.windows, "--windows") if args.windows else None
    return store.load_archive(archives, windows=windows)


def cmd_measure(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args)
    records = measurements.compute_all(dataset, exclude_merges=args.exclude_merges)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "measurements.csv"
    measurements.write_measurements(records, path)
    print(f"{len(records)} records -> {path}")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    responses = survey.load_survey(_existing(args.survey, "--survey"))
    records = None
    if args.measurements:
        records = measurements.read_measurements(_existing(args.measurements, "--measurements"))
    elif args.archives:
        records = measurements.compute_all(_load_dataset(args), exclude_merges=args.exclude_merges)
    plan = analysis.load_plan(_existing(args.plan, "--plan")) if args.plan else analysis.DEFAULT_PLAN
    config = analysis.AnalysisConfig(pooling=args.pooling, exclude_pos=args.exclude_pos, plan=plan)
    result = analysis.run_analysis(responses, records, config)
    out = report.write_report(result, args.out)
    print(f"report -> {out}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    config = synth.load_effect_config(_existing(args.config, "--config")) if args.config else synth.EffectConfig()
    if args.seed is not None:
        config.seed = args.seed
    paths = synth.generate_files(config, args.out)
    for name, p in paths.items():
        print(f"{name}: {p}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    root = _existing(args.report_dir, "report directory")
    path = report.write_document(root)
    print(path.read_text(encoding="utf-8"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scrumlens", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="download commits, issues and PR comments into an archive")
    p.add_argument("--repo", required=True, help="owner/name")
    p.add_argument("--out", required=True)
    p.add_argument("--since", help="ISO-8601 timestamp with zone offset")
    p.set_defaults(func=cmd_ingest)

    def add_inputs(p: argparse.ArgumentParser) -> None:
        p.add_argument("--archives", help="archive directory")
        p.add_argument("--windows", help="sprint-window config (JSON list)")
        p.add_argument("--exclude-merges", action="store_true", help="ignore merge commits")

    p = sub.add_parser("measure", help="compute the six measurements per developer and sprint")
    add_inputs(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("analyze", help="run all analyses and write the report tables")
    add_inputs(p)
    p.add_argument("--survey", required=True)
    p.add_argument("--measurements", help="measurement table (instead of --archives)")
    p.add_argument("--out", required=True)
    p.add_argument("--exclude-pos", action="store_true", help="exclude Product Owners from the team-agreement table")
    p.add_argument("--pooling", choices=("pooled", "per-team"), default="pooled")
    p.add_argument("--plan", help="JSON list of [question, measure] pairs")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="generate a synthetic survey and archive")
    p.add_argument("--config", help="effect config (JSON)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="render report.md from a report directory")
    p.add_argument("report_dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, FileNotFoundError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, WindowLookupError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ForgeError as exc:
        print(f"forge error: {exc}", file=sys.stderr)
        return EXIT_FORGE


if __name__ == "__main__":
    sys.exit(main())
