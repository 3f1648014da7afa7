"""plots: render figures from a sweep index file."""

from __future__ import annotations

import argparse
import sys

from swfplots.figures import FigureSpec, SchemaError, render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="plots",
        description="Render regret figures from swfalloc sweep output")
    ap.add_argument("--index", required=True, help="sweep index.json path")
    ap.add_argument("--kind", required=True, choices=("t", "q", "k"))
    ap.add_argument("--norm", choices=("raw", "sqrt"), default="raw")
    ap.add_argument("--out", required=True, help="output PNG path")
    args = ap.parse_args(argv)
    try:
        summary = render(FigureSpec(args.index, args.kind, args.norm, args.out))
    except (SchemaError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"{len(summary['series'])} series -> {summary['path']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
