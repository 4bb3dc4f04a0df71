"""Metrics CSV and manifest persistence.

The CSV schema is fixed and byte-stable:

    iter,wait_time,cum_time,loss,accuracy,n_received,n_accepted,updated

Floats are written with 9 significant digits, accuracy is empty on
non-evaluation iterations, and `updated` is true/false. All writes go
through a temp file plus rename so interrupted runs never leave a
truncated file behind.
"""

from __future__ import annotations

import json
import os
import tempfile

CSV_HEADER = "iter,wait_time,cum_time,loss,accuracy,n_received,n_accepted,updated"


def format_float(x: float) -> str:
    return "%.9g" % x


def metrics_csv_text(records) -> str:
    lines = [CSV_HEADER]
    for r in records:
        accuracy = "" if r.accuracy is None else format_float(r.accuracy)
        lines.append(",".join([
            str(r.t),
            format_float(r.wait_time),
            format_float(r.cumulative_time),
            format_float(r.loss),
            accuracy,
            str(r.n_received),
            str(r.n_accepted),
            "true" if r.updated else "false",
        ]))
    return "\n".join(lines) + "\n"


def write_text_atomic(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=os.path.basename(path) + ".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_metrics_csv(records, path) -> None:
    write_text_atomic(path, metrics_csv_text(records))


def write_json_atomic(path, obj) -> None:
    write_text_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def mean_wait_time(records) -> float:
    if not records:
        raise ValueError("mean_wait_time: no records")
    return sum(r.wait_time for r in records) / len(records)


def final_accuracy(records):
    """Last evaluated accuracy, or None if no iteration was evaluated."""
    for r in reversed(records):
        if r.accuracy is not None:
            return r.accuracy
    return None
