#!/usr/bin/env python3
"""Print the empirical resilience constants for a configured task.

Thin wrapper over `dstar probe`; handy for checking whether a task satisfies
the angle condition before committing to a long run.
"""

import argparse
import sys

from dstar.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/blobs_desk.toml")
    ap.add_argument("--set", action="append", default=[])
    args = ap.parse_args()
    argv = ["probe", "--config", args.config]
    for override in args.set:
        argv += ["--set", override]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
