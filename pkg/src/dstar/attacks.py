"""Byzantine gradient fabrication.

Both attacks are omniscient: the simulator computes all honest gradients
first each iteration and hands their statistics over. All Byzantine workers
collude and send the identical fabricated vector.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .numerics import GradVector, normal_quantile


@dataclass(frozen=True)
class HonestStats:
    """Coordinate-wise mean and population standard deviation of honest gradients."""

    mu: GradVector
    sigma: GradVector
    count: int


def honest_stats(honest_grads) -> HonestStats:
    if len(honest_grads) == 0:
        raise ValueError("honest_stats: empty gradient list")
    try:
        stacked = np.asarray(honest_grads, dtype=np.float64)
    except ValueError as exc:
        raise ValueError("honest_stats: mismatched dimensions") from exc
    if stacked.ndim != 2:
        raise ValueError("honest_stats: expected a list of 1-D vectors")
    mu = stacked.mean(axis=0)
    # population convention: divide by count, matching the distribution sigma
    sigma = np.sqrt(np.mean((stacked - mu) ** 2, axis=0))
    return HonestStats(mu=mu, sigma=sigma, count=stacked.shape[0])


def attack_little(stats: HonestStats, N: int, f: int) -> GradVector:
    """Shift the honest mean by the largest z that still hides inside a majority.

    s = floor(N/2 + 1) - f workers must be fooled alongside the f Byzantine
    ones; z_max is the (N - s)/N standard normal quantile and the fabricated
    vector is mu + z_max * sigma. A quantile position outside (0, 1) makes the
    attack degenerate: it is reported and the honest mean is sent instead.
    """
    if N < 1:
        raise ValueError(f"attack_little: need N >= 1, got {N}")
    if not 0 <= f < N:
        raise ValueError(f"attack_little: need 0 <= f < N, got f={f}")
    s = math.floor(N / 2 + 1) - f
    p = (N - s) / N
    if not 0.0 < p < 1.0:
        warnings.warn(
            f"attack_little degenerate: quantile position {p} outside (0, 1)"
            " for N={}, f={}; falling back to the honest mean".format(N, f),
            RuntimeWarning,
        )
        return stats.mu.copy()
    z_max = normal_quantile(p)
    return stats.mu + z_max * stats.sigma


def attack_empire(stats: HonestStats, scale: float) -> GradVector:
    """Scaled sign flip of the honest mean: g_mal = -scale * mu."""
    if scale <= 0:
        raise ValueError(f"attack_empire: scale must be positive, got {scale}")
    return -scale * stats.mu
