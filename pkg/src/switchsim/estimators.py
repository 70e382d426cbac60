"""Treatment-effect estimators over observed panels.

The truncated Horvitz-Thompson estimator weighs each outcome by the inverse
exposure probability of its arm; difference-in-means variants pool retained
rounds, optionally discarding a burn-in prefix within every block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import position_in_block
from .dynamics import ObservedPanel
from .exposure import ExposureProbabilities, ExposureSpec, exposure_indicator_matrix
from .graphs import InterferenceGraph


class EstimatorUndefinedError(RuntimeError):
    """The estimator cannot produce a value on this realization."""


@dataclass
class HTOutput:
    delta_hat: float
    retained_fraction: float
    terms: np.ndarray | None = None


@dataclass
class DIMBIOutput:
    delta_hat: float
    n_treated_used: int
    n_control_used: int
    burn_in: int


def ht_truncated(
    panel: ObservedPanel,
    g: InterferenceGraph,
    spec: ExposureSpec,
    probs: ExposureProbabilities,
    materialize_terms: bool = False,
) -> HTOutput:
    """Radius-r truncated Horvitz-Thompson estimate of the GATE.

    Each (i, t) contributes (X1 - X0) * Y / p where X_a is the exposure
    indicator for arm a and p the (arm-symmetric) exposure probability.
    Unexposed terms contribute exactly 0 and never touch p.
    """
    W = panel.W.values
    if probs.values.shape != W.shape:
        raise ValueError("probabilities were computed for different dimensions")
    x1 = exposure_indicator_matrix(W, g, spec, 1)
    x0 = exposure_indicator_matrix(W, g, spec, 0)
    signed = (x1.astype(np.int64) - x0).astype(float)
    needed = signed != 0
    if np.any(probs.values[needed] <= 0):
        raise EstimatorUndefinedError("zero exposure probability at an exposed entry")
    terms = np.zeros_like(panel.Y)
    terms[needed] = signed[needed] * panel.Y[needed] / probs.values[needed]
    n, t = W.shape
    return HTOutput(
        delta_hat=float(terms.sum() / (n * t)),
        retained_fraction=float((x1.sum() + x0.sum()) / (2 * n * t)),
        terms=terms if materialize_terms else None,
    )


def dimbi(panel: ObservedPanel, ell: int, b: int) -> DIMBIOutput:
    """Difference in mean outcomes, discarding the first b rounds of each block.

    Defined for single-unit panels. Rounds with within-block position > b are
    pooled by realized arm; an empty arm is an explicit failure.
    """
    if panel.W.n_units != 1:
        raise ValueError("difference-in-means is defined for single-unit panels")
    if not (0 <= b < ell):
        raise ValueError("burn-in must satisfy 0 <= b < block length")
    T = panel.W.horizon
    keep = np.array([position_in_block(t, ell) > b for t in range(1, T + 1)])
    w = panel.W.values[0]
    y = panel.Y[0]
    treated = keep & (w == 1)
    control = keep & (w == 0)
    if not treated.any() or not control.any():
        raise EstimatorUndefinedError(
            "insufficient arm data: an arm has no retained rounds"
        )
    return DIMBIOutput(
        delta_hat=float(y[treated].mean() - y[control].mean()),
        n_treated_used=int(treated.sum()),
        n_control_used=int(control.sum()),
        burn_in=int(b),
    )


def dim(panel: ObservedPanel, ell: int) -> DIMBIOutput:
    """Plain difference-in-means: burn-in of zero."""
    return dimbi(panel, ell, 0)
