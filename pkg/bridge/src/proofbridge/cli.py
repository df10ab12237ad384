"""Command line: serve the step-model wire protocol over stdio or HTTP."""

from __future__ import annotations

import argparse
from typing import Sequence

from .models import StubModel
from .server import run_http, serve_stdio


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proofbridge",
        description="Serve step generation and scoring models over the "
        "JSON wire protocol.",
    )
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument(
        "--stdio", action="store_true",
        help="answer newline-delimited JSON on stdin/stdout",
    )
    mode.add_argument(
        "--port", type=int,
        help="answer HTTP POST requests on this port (0 picks a free one)",
    )
    parser.add_argument("--host", default="127.0.0.1", help="HTTP bind address")
    parser.add_argument("--seed", type=int, default=0, help="model determinism seed")
    parser.add_argument(
        "--beam-width", type=int, default=10,
        help="candidates ranked per generate call",
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.beam_width < 1:
        parser.error("--beam-width must be >= 1")
    model = StubModel(seed=args.seed, beam_width=args.beam_width)
    if args.stdio:
        return serve_stdio(model)
    return run_http(model, args.port, args.host)


if __name__ == "__main__":
    raise SystemExit(main())
