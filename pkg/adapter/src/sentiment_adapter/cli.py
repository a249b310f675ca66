"""Command line wrapper: sentiment-adapter --corpus ... --out ..."""

from __future__ import annotations

import argparse
import sys

from .scoring import DEFAULT_MODEL, AdapterConfig, ModelUnavailable, RowCountMismatch, score_corpus


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sentiment-adapter",
        description="Score a canonical corpus file with a pretrained three-class sentiment model.",
    )
    parser.add_argument("--corpus", required=True, help="canonical corpus CSV")
    parser.add_argument("--out", required=True, help="interchange score file to write")
    parser.add_argument("--model", default=DEFAULT_MODEL, help=f"model identifier (default {DEFAULT_MODEL})")
    parser.add_argument("--batch", type=int, default=32, help="batch size")
    parser.add_argument("--max-len", type=int, default=256, help="max sequence length in tokens")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = AdapterConfig(
        corpus=args.corpus,
        out=args.out,
        model=args.model,
        batch_size=args.batch,
        max_length=args.max_len,
    )
    try:
        summary = score_corpus(cfg)
    except ModelUnavailable as exc:
        print(f"model unavailable: {exc}", file=sys.stderr)
        return 2
    except (RowCountMismatch, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"scored {summary.rows} rows ({summary.truncated} truncated, {summary.empty_defaulted} empty defaulted)")
    if summary.empty_defaulted:
        print("warning: empty-content rows were defaulted to neutral/0.5", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
