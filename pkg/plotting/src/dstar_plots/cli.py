"""dstar-plot: turn swept metrics.csv files into accuracy figures."""

from __future__ import annotations

import argparse
import os
import sys

from .curves import MetricsError, load_metrics
from .render import render


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dstar-plot",
        description="Plot accuracy curves from experiment metrics files.",
    )
    parser.add_argument("--in", dest="pattern", required=True,
                        help="glob matching metrics.csv files")
    parser.add_argument("--out", dest="out_dir", required=True,
                        help="directory for the rendered images")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)

    try:
        curve_sets = load_metrics(args.pattern)
    except MetricsError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2

    try:
        os.makedirs(args.out_dir, exist_ok=True)
        for curves in curve_sets:
            out_path = os.path.join(args.out_dir,
                                    f"accuracy_{curves.attack}.png")
            render(curves, out_path)
            print(f"wrote {out_path}")
    except OSError as exc:
        print(f"plot failed: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
