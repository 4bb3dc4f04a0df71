#!/usr/bin/env python3
"""Sweep the sign-flip attack scale and compare plain averaging to filtering.

Averaging survives small scales because the aggregate keeps a positive
component along the honest mean: with N workers and f attackers sending
-s * mu, the average is ((N - f) - s f) / N * mu, which only flips sign once
s > (N - f) / f. The filter rejects the malicious vector at every scale.
"""

import argparse
import dataclasses
import sys

from dstar.config import AttackSpec, parse_config
from dstar.reporting import final_accuracy
from dstar.simulation import run_experiment


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/blobs_desk.toml")
    ap.add_argument("--scales", default="0.5,1.0,2.0,2.5,3.0,4.0")
    args = ap.parse_args()

    base = parse_config(args.config)
    flip = (base.N - base.f) / base.f
    print(f"N={base.N} f={base.f}: averaging flips sign at scale > {flip:.3f}")
    print(f"{'scale':>6} {'average':>9} {'filtered':>9}")
    for text in args.scales.split(","):
        scale = float(text)
        row = []
        for gar in ("average", "dstar"):
            config = dataclasses.replace(
                base, gar=gar, attack=AttackSpec(kind="empire", scale=scale))
            acc = final_accuracy(run_experiment(config))
            row.append(acc if acc is not None else float("nan"))
        print(f"{scale:>6.2f} {row[0]:>9.3f} {row[1]:>9.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
