"""Accuracy-curve figures from simulator sweep output.

curves: load metrics.csv files into per-attack curve sets
render: draw one figure per attack with a committed style
cli:    `dstar-plot --in <glob> --out <dir>`
"""

__version__ = "0.1.0"
