"""Shared numeric primitives: seeded streams, order statistics, distributions.

A gradient or parameter vector (``GradVector``) is a plain 1-D float64
ndarray. Every vector exchanged within one experiment has the same fixed
dimension d; honest code paths only ever produce finite entries.
"""

from __future__ import annotations

import math
import statistics

import numpy as np

GradVector = np.ndarray

__all__ = [
    "GradVector",
    "RngStream",
    "coordinate_median",
    "normal_quantile",
    "sample_exponential",
]


class RngStream:
    """One independent, replayable random stream.

    Philox is counter based, so the (seed, stream_id) key fully determines
    the draw sequence on every platform; platform-default generators are
    deliberately not used. A stream is single-owner: never advance the same
    instance from two threads.
    """

    def __init__(self, seed: int, stream_id: int):
        seed = int(seed)
        stream_id = int(stream_id)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        if not 0 <= stream_id < 2**64:
            raise ValueError(f"stream_id must fit in 64 unsigned bits, got {stream_id}")
        self.seed = seed
        self.stream_id = stream_id
        key = np.array([seed, stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def uniform(self, size=None):
        """Draws in [0, 1)."""
        return self._gen.random(size)

    def normal(self, size=None):
        """Standard normal draws."""
        return self._gen.standard_normal(size)

    def integers(self, low: int, high: int, size=None):
        """Integer draws in [low, high)."""
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def coordinate_median(vectors) -> GradVector:
    """Per-coordinate median of a nonempty list of equal-length vectors.

    Odd counts return the middle order statistic; even counts average the
    two middle order statistics. Both middles lie inside the honest extremes
    whenever honest values form a strict majority, so the averaging
    convention preserves the per-coordinate robustness bound.
    """
    if len(vectors) == 0:
        raise ValueError("coordinate_median: empty input")
    try:
        stacked = np.asarray(vectors, dtype=np.float64)
    except ValueError as exc:
        raise ValueError("coordinate_median: mismatched dimensions") from exc
    if stacked.ndim != 2:
        raise ValueError("coordinate_median: expected a list of 1-D vectors")
    return np.median(stacked, axis=0)


_STD_NORMAL = statistics.NormalDist()


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF, accurate to well under 1e-6."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal_quantile: p must lie in (0, 1), got {p}")
    return _STD_NORMAL.inv_cdf(p)


def sample_exponential(scale: float, u: float) -> float:
    """Inverse-transform exponential draw; `scale` is the distribution mean."""
    if scale <= 0:
        raise ValueError(f"sample_exponential: scale must be positive, got {scale}")
    if not 0.0 <= u < 1.0:
        raise ValueError(f"sample_exponential: u must lie in [0, 1), got {u}")
    # log1p keeps precision for small u
    return -scale * math.log1p(-u)
