"""Truncated exposure mappings and exact exposure probabilities.

The radius-r exposure indicator for (i, t, a) requires that at every round in
the window [max(1, t-r), t] at least a (1-delta) fraction of the closed
neighborhood N(i) was assigned arm a. Under the clustered switchback design
the blocks intersecting the window carry independent cluster coins, so the
exact exposure probability factorizes across blocks.

Fraction tests compare exact rationals (the float delta is interpreted via
its exact binary value) so boundary ties are unambiguous.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .design import TimeBlocks, TreatmentMatrix
from .graphs import Clustering, InterferenceGraph


@dataclass(frozen=True)
class ExposureSpec:
    """Parameters of the truncated exposure mapping and of the design it faces."""

    radius: int
    delta: float
    block_length: int
    clustering: Clustering

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be >= 0")
        if not (0.0 <= self.delta < 1.0):
            raise ValueError("delta must be in [0, 1)")
        if self.block_length < 1:
            raise ValueError("block length must be >= 1")


def exposure_threshold(nb_size: int, delta: float) -> int:
    """Smallest integer count k with k / nb_size >= 1 - delta (exact rationals)."""
    return int(math.ceil((1 - Fraction(delta)) * nb_size))


def exposure_indicator(
    W: TreatmentMatrix, g: InterferenceGraph, i: int, t: int, a: int,
    spec: ExposureSpec,
) -> int:
    """Radius-r truncated exposure indicator for unit i at round t, arm a."""
    nb = g.neighborhoods[i]
    k_min = exposure_threshold(nb.size, spec.delta)
    for tp in range(max(1, t - spec.radius), t + 1):
        if int((W.values[nb, tp - 1] == a).sum()) < k_min:
            return 0
    return 1


def exposure_indicator_matrix(
    W_values: np.ndarray, g: InterferenceGraph, spec: ExposureSpec, a: int
) -> np.ndarray:
    """Exposure indicators for all (i, t) at once; returns an (N, T) 0/1 array."""
    N, T = W_values.shape
    counts = g.closed_adjacency.astype(np.int64) @ (W_values == a).astype(np.int64)
    k_min = np.array(
        [exposure_threshold(g.neighborhoods[i].size, spec.delta) for i in range(N)]
    )
    ok = counts >= k_min[:, None]
    fails = np.concatenate(
        [np.zeros((N, 1), dtype=np.int64), np.cumsum(~ok, axis=1)], axis=1
    )
    lo = np.maximum(0, np.arange(T) - spec.radius)
    return (fails[:, 1:] - fails[:, lo] == 0).astype(np.int8)


def _cluster_weights(g: InterferenceGraph, pi: Clustering, i: int) -> np.ndarray:
    """Sizes of the intersections of N(i) with each cluster it touches."""
    _, counts = np.unique(pi.assignment[g.neighborhoods[i]], return_counts=True)
    return counts


def _block_arm_probability(weights: np.ndarray, k_min: int) -> float:
    """P[sum_j m_j Z_j >= k_min] for i.i.d. fair coins Z_j, exactly.

    Counts weight-sum multiplicities with an integer subset-sum table, so the
    result is a dyadic rational evaluated in one float division.
    """
    total = int(weights.sum())
    if k_min <= 0:
        return 1.0
    if k_min > total:
        return 0.0
    d = len(weights)
    if d * total > 50_000_000:
        raise ValueError(
            f"exposure table of {d} clusters x weight {total} is infeasible; "
            "coarsen the clustering or reduce the neighborhood"
        )
    ways = [0] * (total + 1)
    ways[0] = 1
    for w in weights:
        w = int(w)
        for k in range(total, w - 1, -1):
            ways[k] += ways[k - w]
    return sum(ways[k_min:]) / (1 << d)


def _window_block_count(blocks: TimeBlocks, t: int, r: int) -> int:
    """Number of timeblocks intersecting the clipped window [max(1, t-r), t]."""
    return blocks.block_index(t) - blocks.block_index(max(1, t - r)) + 1


def exposure_probability_exact(
    g: InterferenceGraph, spec: ExposureSpec, T: int, i: int, t: int, a: int = 1
) -> float:
    """Exact P[X_ita^r = 1] under the clustered switchback design.

    Arm-symmetric because cluster coins are fair; the per-block success
    probability is raised to the number of blocks intersecting the window.
    """
    blocks = TimeBlocks(T, spec.block_length)
    weights = _cluster_weights(g, spec.clustering, i)
    k_min = exposure_threshold(int(weights.sum()), spec.delta)
    q = _block_arm_probability(weights, k_min)
    return q ** _window_block_count(blocks, t, spec.radius)


def min_exposure_probability(
    g: InterferenceGraph, spec: ExposureSpec, T: int, i: int
) -> float:
    """min over rounds and arms of the exact exposure probability of unit i."""
    blocks = TimeBlocks(T, spec.block_length)
    weights = _cluster_weights(g, spec.clustering, i)
    k_min = exposure_threshold(int(weights.sum()), spec.delta)
    q = _block_arm_probability(weights, k_min)
    worst = max(_window_block_count(blocks, t, spec.radius) for t in range(1, T + 1))
    return q**worst


class ExposureProbabilities:
    """Exact exposure probabilities for every (unit, round); arm-symmetric."""

    def __init__(self, values: np.ndarray, p_min: np.ndarray) -> None:
        if np.any(values <= 0) or np.any(values > 1):
            raise ValueError("exposure probabilities must lie in (0, 1]")
        self.values = values
        self.p_min = p_min

    def p(self, i: int, t: int, a: int = 1) -> float:
        return float(self.values[i, t - 1])

    def min_for(self, i: int) -> float:
        return float(self.p_min[i])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["unit", "round", "p"])
            N, T = self.values.shape
            for i in range(N):
                for t in range(T):
                    writer.writerow([i, t + 1, f"{self.values[i, t]:.10g}"])


def exposure_probabilities(
    g: InterferenceGraph, spec: ExposureSpec, T: int
) -> ExposureProbabilities:
    """Exact probability table for all (i, t), plus per-unit minima."""
    blocks = TimeBlocks(T, spec.block_length)
    n_blocks = np.array(
        [_window_block_count(blocks, t, spec.radius) for t in range(1, T + 1)]
    )
    values = np.empty((g.n_units, T))
    for i in range(g.n_units):
        weights = _cluster_weights(g, spec.clustering, i)
        k_min = exposure_threshold(int(weights.sum()), spec.delta)
        q = _block_arm_probability(weights, k_min)
        values[i] = q ** n_blocks.astype(float)
    return ExposureProbabilities(values, values.min(axis=1))


def entropy(delta: float) -> float:
    """Binary entropy in bits, with H(0) = H(1) = 0 by continuity."""
    if not (0.0 <= delta <= 1.0):
        raise ValueError("delta must be in [0, 1]")
    if delta in (0.0, 1.0):
        return 0.0
    return -delta * math.log2(delta) - (1 - delta) * math.log2(1 - delta)


def exposure_lower_bound(d: int, r: int, ell: int, delta: float) -> float:
    """Closed-form lower bound on the minimal exposure probability.

    At delta = 0 the per-block probability is exactly 2^-d. For delta > 0 the
    Stirling lower bound on the binomial tail gives
    2^{-(1 - H(delta)) d} / sqrt(2 pi d delta (1 - delta)) per block, valid
    when delta * d is an integer. Either way the per-block factor is raised to
    1 + ceil(r / ell) window blocks and clamped into (0, 1].
    """
    if d < 1:
        raise ValueError("cluster degree must be >= 1")
    exponent = 1 + -(-r // ell)
    if delta == 0.0:
        return 2.0 ** (-d * exponent)
    per_block = 2.0 ** (-(1 - entropy(delta)) * d) / math.sqrt(
        2 * math.pi * d * delta * (1 - delta)
    )
    return min(1.0, per_block) ** exponent
