"""Command line entry point.

Exit codes: 0 success, 2 unreadable or malformed input, 3 validation violations.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path

from .decomposition import UnknownSubsystem
from .graph import export_dot
from .model import ModelError
from .report import ValidationFailed, load_and_analyze, render

CONFIG_ENV = "MONOSLICER_CONFIG"

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INVALID = 3

log = logging.getLogger("monoslicer")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monoslicer",
        description="Find microservice candidates in a monolith described by a fact file.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    analyze = sub.add_parser("analyze", help="run the full analysis and print a report")
    analyze.add_argument("--model", required=True, type=Path, help="JSON fact file")
    analyze.add_argument("--areas", required=True, type=Path, help="CSV table,area map")
    analyze.add_argument("--annotations", type=Path, help="JSON names/purposes/features keyed by slice")
    analyze.add_argument("--config", type=Path, help=f"JSON analysis config (default: ${CONFIG_ENV})")
    analyze.add_argument(
        "--subsystem", action="append", dest="subsystems", metavar="NAME", help="limit to a subsystem (repeatable)"
    )
    analyze.add_argument("--format", choices=("json", "markdown"), default="json")
    analyze.add_argument("--dot", type=Path, metavar="DIR", help="also write one DOT file per subsystem here")
    analyze.add_argument("-o", "--output", type=Path, help="write the report here instead of stdout")
    analyze.add_argument("-v", "--verbose", action="store_true")
    return parser


def _safe_filename(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name) or "_"


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    config = args.config
    if config is None and os.environ.get(CONFIG_ENV):
        config = Path(os.environ[CONFIG_ENV])

    try:
        analysis = load_and_analyze(args.model, args.areas, args.annotations, config, args.subsystems)
    except ValidationFailed as exc:
        for v in exc.violations:
            print(v, file=sys.stderr)
        print(f"monoslicer: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, ModelError, UnknownSubsystem) as exc:
        print(f"monoslicer: {exc}", file=sys.stderr)
        return EXIT_INPUT

    log.info(
        "graph: %d vertices, %d edges, %d facade/table pairs",
        len(analysis.graph.vertices),
        len(analysis.graph.edges),
        len(analysis.pairs),
    )
    payload = render(analysis.reports, args.format)
    if args.output:
        args.output.write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()

    if args.dot:
        args.dot.mkdir(parents=True, exist_ok=True)
        (args.dot / "monolith.dot").write_text(export_dot(analysis.graph), encoding="utf-8")
        for report in analysis.reports:
            text = export_dot(analysis.graph, analysis.partition, report.subsystem)
            (args.dot / f"{_safe_filename(report.subsystem)}.dot").write_text(text, encoding="utf-8")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
