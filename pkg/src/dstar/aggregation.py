"""Gradient aggregation rules.

The filtered fastest-k rule works in two phases. A warm-up iteration
aggregates with the coordinate-wise median and records two normalized
statistics of that median against the server's validation gradient:

    S = ||g_m - g_v1||^2 / ||g_v1||        (squared distance, norm-scaled)
    D = <g_m, g_v1> / ||g_v1||^2           (projection coefficient)

Afterwards each incoming gradient g_i is judged against the current
validation gradient g_v by the same two statistics and accepted iff
s_i <= S and d_i >= D; the k fastest accepted gradients are averaged.

The five baselines (average, median, krum, cge, trmean, aksel) all wait for
every worker. All tie-breaks go to the lowest input index, so every rule
here is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import GradVector, coordinate_median

__all__ = [
    "FilterThresholds",
    "FilterVerdict",
    "AssumptionEstimates",
    "aggregate_average",
    "aggregate_median",
    "aggregate_krum",
    "aggregate_cge",
    "aggregate_trmean",
    "aggregate_aksel",
    "compute_thresholds",
    "filter_gradient",
    "dstar_aggregate",
    "theoretical_alpha",
    "estimate_assumption_constants",
]


@dataclass(frozen=True)
class FilterThresholds:
    """Warm-up statistics S, D plus the vectors that produced them.

    With a single warm-up round S and D are exactly the stored formulas of
    g_m and g_v1; with a longer warm-up they are medians over the per-round
    values and g_m / g_v1 keep the last round's vectors.
    """

    S: float
    D: float
    g_m: GradVector
    g_v1: GradVector


@dataclass(frozen=True)
class FilterVerdict:
    accepted: bool
    s_i: float
    d_i: float


@dataclass(frozen=True)
class AssumptionEstimates:
    """Empirical stand-ins for the variance, gradient-norm and Lipschitz bounds."""

    d_sigma2: float
    V_hat: float
    Vprime_hat: float
    L_hat: float


def _stack(grads, who: str) -> np.ndarray:
    if len(grads) == 0:
        raise ValueError(f"{who}: empty gradient list")
    try:
        stacked = np.asarray(grads, dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{who}: mismatched dimensions") from exc
    if stacked.ndim != 2:
        raise ValueError(f"{who}: expected a list of 1-D vectors")
    return stacked


def _sq_norm(v: np.ndarray) -> float:
    return float(np.dot(v, v))


def aggregate_average(grads) -> GradVector:
    return _stack(grads, "aggregate_average").mean(axis=0)


def aggregate_median(grads) -> GradVector:
    return coordinate_median(grads)


def aggregate_krum(grads, f: int) -> GradVector:
    """Vector with the smallest sum of squared distances to its n-f-2 nearest neighbors."""
    stacked = _stack(grads, "aggregate_krum")
    n = stacked.shape[0]
    n_neighbors = n - f - 2
    if n_neighbors < 1:
        raise ValueError(f"aggregate_krum: need n - f - 2 >= 1, got n={n}, f={f}")
    scores = np.empty(n)
    for i in range(n):
        diff = stacked - stacked[i]
        dist2 = np.einsum("ij,ij->i", diff, diff)
        dist2.sort()
        # dist2[0] is the zero distance to itself
        scores[i] = dist2[1:1 + n_neighbors].sum()
    return stacked[int(np.argmin(scores))].copy()


def aggregate_cge(grads, f: int) -> GradVector:
    """Average of the n - f smallest-norm vectors."""
    stacked = _stack(grads, "aggregate_cge")
    n = stacked.shape[0]
    if n <= f:
        raise ValueError(f"aggregate_cge: need n > f, got n={n}, f={f}")
    norms = np.sqrt(np.einsum("ij,ij->i", stacked, stacked))
    keep = np.argsort(norms, kind="stable")[: n - f]
    return stacked[keep].mean(axis=0)


def aggregate_trmean(grads, b: int) -> GradVector:
    """Coordinate-wise trimmed mean: drop the b largest and b smallest per coordinate."""
    stacked = _stack(grads, "aggregate_trmean")
    n = stacked.shape[0]
    if b < 0:
        raise ValueError(f"aggregate_trmean: b must be nonnegative, got {b}")
    if n <= 2 * b:
        raise ValueError(f"aggregate_trmean: need n > 2b, got n={n}, b={b}")
    ordered = np.sort(stacked, axis=0)
    return ordered[b:n - b].mean(axis=0)


def aggregate_aksel(grads) -> GradVector:
    """Average of the vectors whose squared distance to the coordinate median
    is at most the median of those distances."""
    stacked = _stack(grads, "aggregate_aksel")
    m = np.median(stacked, axis=0)
    diff = stacked - m
    q = np.einsum("ij,ij->i", diff, diff)
    keep = q <= np.median(q)
    return stacked[keep].mean(axis=0)


def compute_thresholds(g_m: GradVector, g_v1: GradVector) -> FilterThresholds:
    g_m = np.asarray(g_m, dtype=np.float64)
    g_v1 = np.asarray(g_v1, dtype=np.float64)
    if g_m.shape != g_v1.shape:
        raise ValueError("compute_thresholds: dimension mismatch")
    sq_v = _sq_norm(g_v1)
    if sq_v == 0.0:
        raise ValueError("compute_thresholds: degenerate zero validation gradient")
    diff = g_m - g_v1
    S = _sq_norm(diff) / math.sqrt(sq_v)
    D = float(np.dot(g_m, g_v1)) / sq_v
    return FilterThresholds(S=S, D=D, g_m=g_m.copy(), g_v1=g_v1.copy())


def filter_gradient(g_i: GradVector, g_v: GradVector,
                    th: FilterThresholds) -> FilterVerdict:
    g_i = np.asarray(g_i, dtype=np.float64)
    g_v = np.asarray(g_v, dtype=np.float64)
    if g_i.shape != g_v.shape:
        raise ValueError("filter_gradient: dimension mismatch")
    sq_v = _sq_norm(g_v)
    if sq_v == 0.0:
        raise ValueError("filter_gradient: degenerate zero validation gradient")
    diff = g_i - g_v
    s_i = _sq_norm(diff) / math.sqrt(sq_v)
    d_i = float(np.dot(g_i, g_v)) / sq_v
    return FilterVerdict(accepted=(s_i <= th.S and d_i >= th.D), s_i=s_i, d_i=d_i)


def dstar_aggregate(accepted) -> GradVector:
    """Mean over the actually accepted gradients.

    Dividing by the accepted count rather than the nominal k keeps the update
    unbiased in scale when fewer than k gradients pass the filter.
    """
    if len(accepted) == 0:
        raise ValueError("dstar_aggregate: no accepted gradients")
    return _stack(accepted, "dstar_aggregate").mean(axis=0)


def theoretical_alpha(n: int, f: int, k: int, d_sigma2: float, V_hat: float,
                      Vprime_hat: float, grad_norm: float) -> float:
    """Resilience angle alpha (radians) implied by the estimated constants.

    sin(alpha) = sqrt(2 (n - f) d_sigma2 / k) * (V / V')^(1/4) / ||grad||.
    """
    if n <= 2 * f:
        raise ValueError(f"theoretical_alpha: breakdown point requires n > 2f, got n={n}, f={f}")
    if k < 1:
        raise ValueError("theoretical_alpha: k must be at least 1")
    if d_sigma2 < 0:
        raise ValueError("theoretical_alpha: d_sigma2 must be nonnegative")
    if Vprime_hat <= 0 or V_hat < Vprime_hat:
        raise ValueError("theoretical_alpha: need 0 < Vprime_hat <= V_hat")
    if grad_norm <= 0:
        raise ValueError("theoretical_alpha: grad_norm must be positive")
    sin_alpha = math.sqrt(2.0 * (n - f) * d_sigma2 / k) \
        * (V_hat / Vprime_hat) ** 0.25 / grad_norm
    if sin_alpha >= 1.0:
        raise ValueError(
            f"resilience condition violated: sin(alpha) = {sin_alpha:.6g} >= 1"
        )
    return math.asin(sin_alpha)


def estimate_assumption_constants(worker_grads, validation_grads,
                                  param_grad_pairs) -> AssumptionEstimates:
    """Empirical variance / norm / Lipschitz constants from gradient samples.

    d_sigma2 averages ||g - mean||^2 over worker gradients; V_hat is the max
    squared norm over all samples; Vprime_hat the min squared norm over
    validation gradients; L_hat the max secant slope over distinct theta pairs
    (coincident pairs are skipped).
    """
    workers = _stack(worker_grads, "estimate_assumption_constants(worker)")
    if workers.shape[0] < 2:
        raise ValueError("estimate_assumption_constants: need at least 2 worker gradients")
    validation = _stack(validation_grads, "estimate_assumption_constants(validation)")
    pairs = list(param_grad_pairs)
    if len(pairs) < 2:
        raise ValueError("estimate_assumption_constants: need at least 2 parameter/gradient pairs")

    mean = workers.mean(axis=0)
    centered = workers - mean
    d_sigma2 = float(np.einsum("ij,ij->i", centered, centered).mean())

    sq_worker = np.einsum("ij,ij->i", workers, workers)
    sq_val = np.einsum("ij,ij->i", validation, validation)
    V_hat = float(max(sq_worker.max(), sq_val.max()))
    Vprime_hat = float(sq_val.min())

    L_hat = 0.0
    for a in range(len(pairs)):
        theta_a, grad_a = (np.asarray(x, dtype=np.float64) for x in pairs[a])
        for bidx in range(a + 1, len(pairs)):
            theta_b, grad_b = (np.asarray(x, dtype=np.float64) for x in pairs[bidx])
            dtheta = float(np.linalg.norm(theta_a - theta_b))
            if dtheta == 0.0:
                continue
            L_hat = max(L_hat, float(np.linalg.norm(grad_a - grad_b)) / dtheta)
    return AssumptionEstimates(d_sigma2=d_sigma2, V_hat=V_hat,
                               Vprime_hat=Vprime_hat, L_hat=L_hat)
