"""Script entry point: epibsl-plot --input CSV --kind KIND --out IMAGE."""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .plots import KINDS, PlotSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epibsl-plot",
        description="Render simulator CSV outputs as figures")
    parser.add_argument("--input", required=True, help="input CSV path")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--x", default=None, help="x axis column (heatmaps)")
    parser.add_argument("--y", default=None, help="y axis column (heatmaps)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(input=args.input, kind=args.kind, out=args.out,
                    x=args.x, y=args.y)
    try:
        out = render(spec)
    except (SchemaError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
