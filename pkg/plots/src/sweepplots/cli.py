"""sweepplots CLI. Exit codes: 0 ok, 1 usage, 2 bad input (schema/missing file)."""

from __future__ import annotations

import argparse
import sys

from .render import FIGURES, SchemaError, render


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def main(argv=None):
    parser = _Parser(prog="sweepplots")
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render a figure from a sweep summary.csv")
    p_render.add_argument("--summary", required=True, help="path to summary.csv")
    p_render.add_argument("--figure", required=True, choices=FIGURES)
    p_render.add_argument("--out", required=True, help="output image path (.png and .svg written)")
    args = parser.parse_args(argv)
    try:
        series = render(args.summary, args.figure, args.out)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"rendered {args.figure} figure with {len(series)} series -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
