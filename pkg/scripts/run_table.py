#!/usr/bin/env python3
"""Reproduce the desk-scale accuracy table: every rule against every attack.

Runs the full gar x attack grid on the blobs task and prints final accuracy
and mean wait time per cell. Equivalent to `dstar sweep` but with the grid
spelled out, so it doubles as a usage example.
"""

import argparse
import sys

from dstar.config import GARS, ATTACKS, parse_config
from dstar.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/blobs_desk.toml")
    ap.add_argument("--out", default="results/table")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    parse_config(args.config)  # fail fast on a bad file before sweeping
    argv = [
        "sweep", "--config", args.config, "--out", args.out,
        "--gars", ",".join(GARS), "--attacks", ",".join(ATTACKS),
    ]
    if args.seed is not None:
        argv += ["--set", f"seed={args.seed}"]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
