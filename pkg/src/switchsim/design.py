"""Time blocking and sampling of clustered switchback treatment matrices.

Rounds are 1-indexed (round t lives in column t-1 of the underlying arrays).
"""

from __future__ import annotations

import numpy as np

from .graphs import Clustering


class TimeBlocks:
    """Partition of rounds 1..T into contiguous blocks of length ell.

    All blocks have length ell except possibly the last. Block k (0-indexed)
    covers rounds [k*ell + 1, min((k+1)*ell, T)].
    """

    def __init__(self, horizon: int, block_length: int) -> None:
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        if block_length < 1:
            raise ValueError("block length must be >= 1")
        self.horizon = int(horizon)
        self.block_length = int(block_length)
        self.blocks = tuple(
            (k * block_length + 1, min((k + 1) * block_length, horizon))
            for k in range(-(-horizon // block_length))
        )

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def block_index(self, t: int) -> int:
        """0-indexed block containing round t."""
        if not (1 <= t <= self.horizon):
            raise ValueError(f"round {t} outside 1..{self.horizon}")
        return (t - 1) // self.block_length


def time_blocks(T: int, ell: int) -> TimeBlocks:
    return TimeBlocks(T, ell)


class TreatmentMatrix:
    """Realized binary treatment assignment, one row per unit, one column per round."""

    def __init__(self, values) -> None:
        values = np.asarray(values, dtype=np.int8)
        if values.ndim != 2:
            raise ValueError("treatment matrix must be 2-D")
        if not np.isin(values, (0, 1)).all():
            raise ValueError("treatments must be 0 or 1")
        self.values = values

    @property
    def n_units(self) -> int:
        return self.values.shape[0]

    @property
    def horizon(self) -> int:
        return self.values.shape[1]

    def to_csv(self, path) -> None:
        """Row-major bit CSV, one row per unit."""
        np.savetxt(path, self.values, fmt="%d", delimiter=",")

    @classmethod
    def from_csv(cls, path) -> "TreatmentMatrix":
        return cls(np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.int8)))


def sample_switchback(
    pi: Clustering, blocks: TimeBlocks, rng: np.random.Generator
) -> TreatmentMatrix:
    """Draw a clustered switchback assignment.

    One fair coin per (cluster, block) rectangle; exactly
    n_clusters * n_blocks draws are consumed, in (cluster id ascending,
    block index ascending) order, so a seeded stream fully determines W.
    """
    coins = rng.integers(0, 2, size=(pi.n_clusters, blocks.n_blocks), dtype=np.int8)
    W = np.empty((pi.n_units, blocks.horizon), dtype=np.int8)
    col = np.empty(blocks.horizon, dtype=np.int64)
    for k, (lo, hi) in enumerate(blocks.blocks):
        col[lo - 1 : hi] = k
    W[:, :] = coins[pi.assignment][:, col]
    return TreatmentMatrix(W)


def constant_policy(a: int, N: int, T: int) -> TreatmentMatrix:
    """All-a assignment (the counterfactual policies defining the GATE)."""
    if a not in (0, 1):
        raise ValueError("arm must be 0 or 1")
    return TreatmentMatrix(np.full((N, T), a, dtype=np.int8))


def position_in_block(t: int, ell: int) -> int:
    """1-based offset of round t inside its length-ell block."""
    if t < 1:
        raise ValueError("rounds are 1-indexed")
    return t - ell * ((t - 1) // ell)
