"""Group sweep metrics into per-attack accuracy curves.

Each metrics.csv is labeled by the sibling manifest.json (config.gar and
config.attack.kind); a `<gar>__<attack>` parent directory name is the
fallback when no manifest is present. Only eval-iteration rows (those with a
non-empty accuracy field) become curve points.
"""

from __future__ import annotations

import csv
import glob as globlib
import json
import os
from dataclasses import dataclass

EXPECTED_HEADER = (
    "iter", "wait_time", "cum_time", "loss", "accuracy",
    "n_received", "n_accepted", "updated",
)


class MetricsError(ValueError):
    """A metrics file or glob that violates the expected schema."""


@dataclass(frozen=True)
class CurveSet:
    """All accuracy curves for one attack: one series per aggregation rule."""

    attack: str
    series: tuple[tuple[str, tuple[tuple[int, float], ...]], ...]

    def __post_init__(self):
        if not self.series:
            raise ValueError("CurveSet: need at least one series")
        for gar, points in self.series:
            iters = [it for it, _ in points]
            if iters != sorted(iters):
                raise ValueError(f"CurveSet: series {gar!r} is not sorted by iteration")
            for _, acc in points:
                if not 0.0 <= acc <= 1.0:
                    raise ValueError(
                        f"CurveSet: series {gar!r} has accuracy {acc} outside [0, 1]"
                    )


def _labels_for(path: str) -> tuple[str, str]:
    manifest_path = os.path.join(os.path.dirname(path), "manifest.json")
    if os.path.exists(manifest_path):
        try:
            with open(manifest_path, encoding="utf-8") as fh:
                config = json.load(fh)["config"]
            return str(config["gar"]), str(config["attack"]["kind"])
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise MetricsError(f"{manifest_path}: unusable manifest: {exc}")
    cell = os.path.basename(os.path.dirname(path))
    if "__" in cell:
        gar, attack = cell.split("__", 1)
        if gar and attack:
            return gar, attack
    raise MetricsError(
        f"{path}: no manifest.json and directory name {cell!r} is not <gar>__<attack>"
    )


def _read_points(path: str) -> tuple[tuple[int, float], ...]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MetricsError(f"{path}: empty file")
        missing = [col for col in EXPECTED_HEADER if col not in header]
        if missing:
            raise MetricsError(f"{path}: missing column '{missing[0]}'")
        if tuple(header) != EXPECTED_HEADER:
            raise MetricsError(f"{path}: malformed header {header!r}")
        it_col = header.index("iter")
        acc_col = header.index("accuracy")
        points = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(EXPECTED_HEADER):
                raise MetricsError(f"{path}:{lineno}: expected "
                                   f"{len(EXPECTED_HEADER)} fields, got {len(row)}")
            if row[acc_col] == "":
                continue
            try:
                points.append((int(row[it_col]), float(row[acc_col])))
            except ValueError as exc:
                raise MetricsError(f"{path}:{lineno}: {exc}")
    return tuple(points)


def load_metrics(pattern: str) -> list[CurveSet]:
    """One CurveSet per attack found under the glob, series in file order."""
    paths = sorted(globlib.glob(pattern))
    if not paths:
        raise MetricsError(f"no files match {pattern!r}")
    grouped: dict[str, list[tuple[str, tuple[tuple[int, float], ...]]]] = {}
    for path in paths:
        gar, attack = _labels_for(path)
        grouped.setdefault(attack, []).append((gar, _read_points(path)))
    return [CurveSet(attack=attack, series=tuple(series))
            for attack, series in grouped.items()]
