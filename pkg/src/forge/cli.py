"""Command-line entry point: one subcommand per pipeline stage plus serve/report.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__, pipeline, reports
from .analytics import export_instruction_sample, histogram_to_csv
from .config import load_config
from .filtering import filter_rates, format_rate_table
from .stores import PipelineStore

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse defaults to exit code 2
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="forge", description=__doc__)
    parser.add_argument("--version", action="version", version=f"forge {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run config JSON")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--dry-run", action="store_true", help="plan only; write nothing")

    sub = parser.add_subparsers(dest="command", metavar="command")
    ingest = sub.add_parser("ingest", parents=[common],
                            help="read group A/B sources into the store")
    ingest.add_argument("--standardize-images", action="store_true",
                        help="resize/pad referenced images into the store's media dir")
    sub.add_parser("screen", parents=[common], help="draw seeded screening batches")
    sub.add_parser("rewrite", parents=[common], help="rewrite group-B samples")
    sub.add_parser("judge", parents=[common], help="model-as-judge filter rewritten samples")
    sub.add_parser("score", parents=[common], help="quality-score sampled originals/rewrites")
    sub.add_parser("analyze", parents=[common],
                   help="write length/kappa/filter-rate reports")
    mix = sub.add_parser("mix", parents=[common], help="export a ratio-mixed manifest")
    mix.add_argument("--name", default="mix", help="manifest name")
    serve = sub.add_parser("serve", parents=[common], help="serve the review API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8400)
    serve.add_argument("--frontend", default=None, help="static frontend directory")
    report = sub.add_parser("report", parents=[common],
                            help="print one canonical report to stdout")
    report.add_argument("--kind", required=True, choices=sorted(reports.REPORT_BUILDERS))
    return parser


def _print_report(payload: Any) -> None:
    print(json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True))


def _run_analyze(cfg, dry_run: bool) -> None:
    store = PipelineStore(cfg.output_root)
    if dry_run:
        print("would write reports to", store.reports_dir)
        return
    written = []
    for kind in ("filter-rates", "agreement", "lengths", "scores"):
        written.append(reports.write_report(kind, store))
    rate_report = reports.build_report("filter-rates", store)
    rows = filter_rates([(r["category"], r["before"], r["after"])
                         for r in rate_report["rows"]]) if rate_report["rows"] else []
    table_path = store.reports_dir / "filter_rates.txt"
    table_path.write_text(format_rate_table(rows) + "\n", encoding="utf-8")
    written.append(table_path)
    lengths = reports.build_report("lengths", store)
    for pool_name, pool in lengths["pools"].items():
        csv_path = store.reports_dir / f"token_lengths_{pool_name}.csv"
        histogram_to_csv([tuple(row) for row in pool["histogram"]], csv_path)
        written.append(csv_path)
    for pool_name, samples in (("original", store.iter_originals()),
                               ("rewritten", store.iter_rewritten())):
        text_path = store.reports_dir / f"instructions_{pool_name}.txt"
        export_instruction_sample(samples, text_path, seed=cfg.seed)
        written.append(text_path)
    for path in written:
        print("wrote", path)


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    try:
        cfg = load_config(args.config, seed_override=args.seed)
        if args.command == "ingest":
            _print_report(pipeline.ingest_stage(
                cfg, dry_run=args.dry_run,
                standardize_images=args.standardize_images,
            ))
        elif args.command == "screen":
            _print_report(pipeline.screen_stage(cfg, dry_run=args.dry_run))
        elif args.command == "rewrite":
            _print_report(pipeline.rewrite_stage(cfg, dry_run=args.dry_run))
        elif args.command == "judge":
            _print_report(pipeline.judge_stage(cfg, dry_run=args.dry_run))
        elif args.command == "score":
            _print_report(pipeline.score_stage(cfg, dry_run=args.dry_run))
        elif args.command == "analyze":
            _run_analyze(cfg, args.dry_run)
        elif args.command == "mix":
            _print_report(pipeline.mix_stage(cfg, dry_run=args.dry_run, name=args.name))
        elif args.command == "report":
            store = PipelineStore(cfg.output_root)
            payload = reports.build_report(args.kind, store)
            sys.stdout.buffer.write(reports.canonical_json_bytes(payload))
            sys.stdout.buffer.write(b"\n")
        elif args.command == "serve":
            from .api import create_app, serve as run_server

            store = PipelineStore(cfg.output_root)
            frontend = Path(args.frontend) if args.frontend else None
            app = create_app(store, cfg.source_registry, media_root=cfg.media_root,
                             frontend_dir=frontend)
            if args.dry_run:
                print(f"would serve on {args.host}:{args.port}")
            else:
                run_server(app, host=args.host, port=args.port)
        else:  # pragma: no cover - argparse rejects unknown commands first
            raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failure: report and exit 2
        log.error("%s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
