"""Markovian outcome dynamics.

Tabular transition kernels, kernel families resolved by neighborhood
treatments, outcome models, panel simulation, exact distribution evolution,
the exact GATE oracle, and mixing-time diagnostics.

State spaces are finite. Walk-type families use integer states -m..m stored
at indices 0..2m. Rounds are 1-indexed in every public signature.
"""

from __future__ import annotations

import math

import numpy as np

from .design import TreatmentMatrix, constant_policy
from .graphs import InterferenceGraph


class NotMixingError(RuntimeError):
    """Max-pair total variation did not decay below 1/2 within the horizon."""


_ROW_SUM_TOL = 1e-12


class TabularKernel:
    """Row-stochastic transition matrix over a finite state space."""

    def __init__(self, rows) -> None:
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
            raise ValueError("kernel must be square")
        if np.any(rows < 0):
            raise ValueError("kernel rows must be nonnegative")
        if np.max(np.abs(rows.sum(axis=1) - 1.0)) > _ROW_SUM_TOL:
            raise ValueError("kernel rows must sum to 1")
        self.rows = rows
        self._cum = None

    @property
    def n_states(self) -> int:
        return self.rows.shape[0]

    def cumulative(self) -> np.ndarray:
        """Cached row-wise cumulative sums (for inverse-CDF sampling)."""
        if self._cum is None:
            self._cum = np.cumsum(self.rows, axis=1)
        return self._cum


def clipped_random_walk_kernel(m: int, p_up: float) -> TabularKernel:
    """Random walk on integers -m..m with stay-put boundaries.

    Interior states move up with probability p_up and down otherwise; at +m an
    up-move stays put, at -m a down-move stays put.
    """
    if not (0.0 <= p_up <= 1.0):
        raise ValueError("p_up must be a probability")
    n = 2 * m + 1
    rows = np.zeros((n, n))
    for idx in range(n):
        up = min(idx + 1, n - 1)
        down = max(idx - 1, 0)
        rows[idx, up] += p_up
        rows[idx, down] += 1.0 - p_up
    return TabularKernel(rows)


def evolve_distribution(f0, kernel_seq) -> np.ndarray:
    """Exact forward (Chapman-Kolmogorov) evolution of a state distribution.

    Returns an array of shape (len(kernel_seq) + 1, n_states) whose row k is
    the distribution after k steps; row 0 is f0.
    """
    f0 = np.asarray(f0, dtype=float)
    if abs(f0.sum() - 1.0) > 1e-9 or np.any(f0 < 0):
        raise ValueError("f0 must be a normalized distribution")
    out = [f0]
    f = f0
    for k in kernel_seq:
        f = f @ k.rows
        out.append(f)
    return np.array(out)


def total_variation(f, g) -> float:
    return 0.5 * float(np.abs(np.asarray(f) - np.asarray(g)).sum())


def dobrushin_coefficient(k: TabularKernel) -> float:
    """Tightest one-step TV contraction factor: max pairwise row TV distance."""
    rows = k.rows
    diff = np.abs(rows[:, None, :] - rows[None, :, :]).sum(axis=2)
    return 0.5 * float(diff.max())


def estimate_tmix(k: TabularKernel, horizon: int = 500) -> float:
    """Fitted geometric TV-decay rate of point-mass pairs under k.

    Evolves all point masses jointly (rows of k^s), tracks the maximum
    pairwise TV distance D_s, and fits log D_s against s by least squares on
    the tail where D_s < 1/2 (at least 10 tail points when the decay allows).
    Returns -1/slope. If the TV collapses below resolution before a tail can
    form, the collapse step itself determines the rate. Raises NotMixingError
    if D_s never drops below 1/2 within the horizon.
    """
    floor = 1e-15
    power = k.rows.copy()
    steps, tvs = [], []
    for s in range(1, horizon + 1):
        d = 0.5 * float(
            np.abs(power[:, None, :] - power[None, :, :]).sum(axis=2).max()
        )
        steps.append(s)
        tvs.append(d)
        n_tail = sum(1 for v in tvs if floor < v < 0.5)
        if d <= floor or (d < 1e-6 and n_tail >= 10):
            break
        power = power @ k.rows
    tvs = np.array(tvs)
    if tvs.min() >= 0.5:
        raise NotMixingError(
            f"max-pair TV still {tvs.min():.3f} after {horizon} steps"
        )
    tail = [(s, math.log(v)) for s, v in zip(steps, tvs) if floor < v < 0.5]
    if len(tail) >= 2:
        xs = np.array([p[0] for p in tail], dtype=float)
        ys = np.array([p[1] for p in tail], dtype=float)
        slope = np.polyfit(xs, ys, 1)[0]
        if slope >= 0:
            raise NotMixingError("TV tail is not decaying")
        return -1.0 / slope
    # instant collapse: a single step took TV from 1 to (at most) the floor
    s1 = next(s for s, v in zip(steps, tvs) if v < 0.5)
    v1 = max(tvs[s1 - 1], floor)
    return s1 / -math.log(v1)


# ---------------------------------------------------------------------------
# Kernel families: resolve (unit, round, neighborhood treatments) -> kernel
# ---------------------------------------------------------------------------


class OwnArmWalkKernels:
    """Clipped-walk kernels driven by the unit's own treatment only.

    Intended for edgeless interference graphs, where the neighborhood
    treatment vector is just (a_i,). Stationary across units and rounds.
    """

    def __init__(self, m: int, p_up_control: float = 0.1, p_up_treated: float = 0.9):
        self.state_cap = int(m)
        self.n_states = 2 * m + 1
        self.state_values = np.arange(-m, m + 1)
        self._by_arm = (
            clipped_random_walk_kernel(m, p_up_control),
            clipped_random_walk_kernel(m, p_up_treated),
        )
        self._p_up = (float(p_up_control), float(p_up_treated))

    def kernel(self, i: int, t: int, w) -> TabularKernel:
        if len(w) != 1:
            raise ValueError("own-arm walk family expects singleton neighborhoods")
        return self._by_arm[int(w[0])]

    def walk_p_up(self, graph: InterferenceGraph, W: np.ndarray) -> np.ndarray:
        return np.where(W == 1, self._p_up[1], self._p_up[0])


class NeighborhoodFractionWalkKernels:
    """Clipped-walk kernels whose drift follows the treated neighbor count.

    p_up(i, t) = 0.1 + 0.8 * (# treated in N(i) at t) / (2h + 1). Boundary
    units keep the same normalizer with a truncated count, so p_up stays in
    [0.1, 0.9] and hits the endpoints exactly under all-control/all-treated
    neighborhoods.
    """

    def __init__(self, m: int, h: int):
        self.state_cap = int(m)
        self.h = int(h)
        self.n_states = 2 * m + 1
        self.state_values = np.arange(-m, m + 1)
        self._by_count = tuple(
            clipped_random_walk_kernel(m, 0.1 + 0.8 * c / (2 * h + 1))
            for c in range(2 * h + 2)
        )

    def kernel(self, i: int, t: int, w) -> TabularKernel:
        return self._by_count[int(np.sum(w))]

    def walk_p_up(self, graph: InterferenceGraph, W: np.ndarray) -> np.ndarray:
        counts = graph.closed_adjacency.astype(np.int64) @ W.astype(np.int64)
        return 0.1 + 0.8 * counts / (2 * self.h + 1)


class FunctionKernels:
    """Generic family backed by a pure resolver function (i, t, w) -> kernel."""

    def __init__(self, n_states: int, fn, state_values=None):
        self.n_states = int(n_states)
        self.state_values = (
            np.arange(n_states) if state_values is None else np.asarray(state_values)
        )
        self._fn = fn

    def kernel(self, i: int, t: int, w) -> TabularKernel:
        return self._fn(i, t, tuple(int(x) for x in w))


class ArmThresholdKernels:
    """Family satisfying fractional neighborhood exposure at threshold delta.

    Returns kernel_treated whenever ||w - 1||_1 <= delta * |N(i)|,
    kernel_control whenever ||w||_1 <= delta * |N(i)|, and kernel_other for
    every other neighborhood pattern.
    """

    def __init__(self, delta: float, kernel_control, kernel_treated, kernel_other):
        if not (0.0 <= delta < 1.0):
            raise ValueError("delta must be in [0, 1)")
        self.delta = float(delta)
        self.n_states = kernel_control.n_states
        self.state_values = np.arange(self.n_states)
        self._k = (kernel_control, kernel_treated, kernel_other)

    def kernel(self, i: int, t: int, w) -> TabularKernel:
        w = np.asarray(w)
        nb = w.size
        if np.sum(1 - w) <= self.delta * nb:
            return self._k[1]
        if np.sum(w) <= self.delta * nb:
            return self._k[0]
        return self._k[2]


def multi_unit_p_up(
    g: InterferenceGraph, h: int, W: TreatmentMatrix, i: int, t: int
) -> float:
    """Move-up probability of unit i at round t on an h-hop line graph."""
    count = int(W.values[g.neighborhoods[i], t - 1].sum())
    return 0.1 + 0.8 * count / (2 * h + 1)


# ---------------------------------------------------------------------------
# Outcome models
# ---------------------------------------------------------------------------


class AffineOutcome:
    """mu_it(s, w) = alpha[i,t] + beta[i,t] * s / m, optionally clamped to [0,1].

    alpha and beta are (N, T) arrays; s is the integer state value; the
    neighborhood treatments are ignored. Noise is Gaussian(0, noise_sigma^2).
    """

    def __init__(self, alpha, beta, state_cap: int, noise_sigma: float = 1.0,
                 clamp: bool = False):
        self.alpha = np.asarray(alpha, dtype=float)
        self.beta = np.asarray(beta, dtype=float)
        if self.alpha.shape != self.beta.shape or self.alpha.ndim != 2:
            raise ValueError("alpha and beta must be matching (N, T) arrays")
        self.state_cap = int(state_cap)
        self.noise_sigma = float(noise_sigma)
        self.clamp = bool(clamp)

    def mean(self, i: int, t: int, s, w=None):
        val = self.alpha[i, t - 1] + self.beta[i, t - 1] * np.asarray(s) / max(
            self.state_cap, 1
        )
        return np.clip(val, 0.0, 1.0) if self.clamp else val

    def mean_matrix(self, states: np.ndarray) -> np.ndarray:
        """Vectorized means for an (N, T) matrix of state values."""
        val = self.alpha + self.beta * states / max(self.state_cap, 1)
        return np.clip(val, 0.0, 1.0) if self.clamp else val


class FunctionOutcome:
    """Outcome model backed by a pure function (i, t, s, w) -> mean."""

    def __init__(self, fn, noise_sigma: float = 0.0, clamp: bool = False):
        self._fn = fn
        self.noise_sigma = float(noise_sigma)
        self.clamp = bool(clamp)

    def mean(self, i: int, t: int, s, w=None):
        val = self._fn(i, t, s, w)
        return min(1.0, max(0.0, val)) if self.clamp else val


# ---------------------------------------------------------------------------
# Instances and panels
# ---------------------------------------------------------------------------


class Instance:
    """A fully specified environment: graph, kernels, outcomes, initial law, horizon.

    initial is an (N, n_states) array of per-unit initial distributions; the
    default is a point mass at state value 0 for every unit.
    """

    def __init__(self, graph: InterferenceGraph, kernels, outcomes,
                 horizon: int, initial=None):
        self.graph = graph
        self.kernels = kernels
        self.outcomes = outcomes
        self.horizon = int(horizon)
        n, k = graph.n_units, kernels.n_states
        if initial is None:
            zero = np.flatnonzero(np.asarray(kernels.state_values) == 0)
            if zero.size != 1:
                raise ValueError("no unique state 0; pass initial explicitly")
            initial = np.zeros((n, k))
            initial[:, zero[0]] = 1.0
        initial = np.asarray(initial, dtype=float)
        if initial.shape != (n, k):
            raise ValueError(f"initial must have shape ({n}, {k})")
        if np.max(np.abs(initial.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("initial distributions must be normalized")
        self.initial = initial

    @property
    def n_units(self) -> int:
        return self.graph.n_units


class ObservedPanel:
    """What an estimator may see: the assignment W and outcomes Y (never states)."""

    def __init__(self, W: TreatmentMatrix, Y) -> None:
        Y = np.asarray(Y, dtype=float)
        if Y.shape != W.values.shape:
            raise ValueError("Y and W dimensions differ")
        if not np.isfinite(Y).all():
            raise ValueError("Y must be finite")
        self.W = W
        self.Y = Y


def _sample_initial_states(instance: Instance, rng: np.random.Generator) -> np.ndarray:
    """Per-unit draw from the initial distributions; returns state indices."""
    cum = np.cumsum(instance.initial, axis=1)
    u = rng.random(instance.n_units)
    return np.minimum((u[:, None] > cum).sum(axis=1), cum.shape[1] - 1)


def simulate_panel(
    instance: Instance, W: TreatmentMatrix, rng: np.random.Generator
) -> ObservedPanel:
    """Simulate latent state paths and emit the observed (W, Y) panel.

    Units evolve independently given W. Round t uses the kernel resolved at
    (i, t, W_{N(i),t}) to produce the state at t+1. Walk-type kernel families
    take a vectorized path; arbitrary families fall back to per-unit
    inverse-CDF sampling.
    """
    g = instance.graph
    N, T = g.n_units, instance.horizon
    if W.values.shape != (N, T):
        raise ValueError(f"W must have shape ({N}, {T})")
    values = np.asarray(instance.kernels.state_values)
    idx = _sample_initial_states(instance, rng)
    states = np.empty((N, T), dtype=np.int64)

    if hasattr(instance.kernels, "walk_p_up"):
        m = instance.kernels.state_cap
        p_up = instance.kernels.walk_p_up(g, W.values)
        pos = idx - m
        for t in range(T):
            states[:, t] = pos
            if t + 1 < T:
                step = np.where(rng.random(N) < p_up[:, t], 1, -1)
                pos = np.clip(pos + step, -m, m)
    else:
        nbs = [g.neighborhoods[i] for i in range(N)]
        cur = idx.copy()
        for t in range(T):
            states[:, t] = values[cur]
            if t + 1 < T:
                u = rng.random(N)
                for i in range(N):
                    k = instance.kernels.kernel(i, t + 1, W.values[nbs[i], t])
                    j = int(np.searchsorted(k.cumulative()[cur[i]], u[i], side="right"))
                    cur[i] = min(j, k.n_states - 1)

    out = instance.outcomes
    if isinstance(out, AffineOutcome):
        means = out.mean_matrix(states.astype(float))
    else:
        means = np.empty((N, T))
        for i in range(N):
            nb = g.neighborhoods[i]
            for t in range(1, T + 1):
                means[i, t - 1] = out.mean(i, t, states[i, t - 1], W.values[nb, t - 1])
    if out.noise_sigma > 0:
        means = means + out.noise_sigma * rng.standard_normal((N, T))
    return ObservedPanel(W, means)


# ---------------------------------------------------------------------------
# Exact oracles
# ---------------------------------------------------------------------------


def _mean_vector(outcomes, i: int, t: int, values: np.ndarray, w) -> np.ndarray:
    """Outcome means over the whole state grid at (i, t)."""
    if isinstance(outcomes, AffineOutcome):
        return np.asarray(outcomes.mean(i, t, values.astype(float)), dtype=float)
    return np.array([outcomes.mean(i, t, v, w) for v in values], dtype=float)


def constant_policy_means(instance: Instance, a: int) -> np.ndarray:
    """Exact E[Y_it | W = a*1] for every (i, t), by distribution evolution."""
    g = instance.graph
    N, T = g.n_units, instance.horizon
    values = np.asarray(instance.kernels.state_values)
    out = np.empty((N, T))
    for i in range(N):
        w = np.full(g.neighborhoods[i].size, a, dtype=np.int8)
        f = instance.initial[i]
        for t in range(1, T + 1):
            out[i, t - 1] = float(f @ _mean_vector(instance.outcomes, i, t, values, w))
            if t < T:
                f = f @ instance.kernels.kernel(i, t, w).rows
    return out


def mean_outcome_exact(instance: Instance, i: int, t: int, a: int) -> float:
    """Exact conditional mean outcome of unit i at round t under W = a*1."""
    g = instance.graph
    values = np.asarray(instance.kernels.state_values)
    w = np.full(g.neighborhoods[i].size, a, dtype=np.int8)
    f = instance.initial[i]
    for s in range(1, t):
        f = f @ instance.kernels.kernel(i, s, w).rows
    return float(f @ _mean_vector(instance.outcomes, i, t, values, w))


def gate_oracle(instance: Instance) -> float:
    """Exact global average treatment effect via per-unit distribution evolution."""
    m1 = constant_policy_means(instance, 1)
    m0 = constant_policy_means(instance, 0)
    return float(np.mean(m1 - m0))


# ---------------------------------------------------------------------------
# Instance generators
# ---------------------------------------------------------------------------


def stationary_instance(
    N: int, T: int, m: int, rng: np.random.Generator, sigma: float = 1.0,
    clamp: bool = False,
) -> Instance:
    """Edgeless units with own-arm walks; alpha_t = 0, beta_it = 1 + 0.2 U(0,1)."""
    from .graphs import build_graph

    g = build_graph(N, [])
    alpha = np.zeros((N, T))
    beta = 1.0 + 0.2 * rng.random((N, T))
    return Instance(
        g,
        OwnArmWalkKernels(m),
        AffineOutcome(alpha, beta, m, noise_sigma=sigma, clamp=clamp),
        T,
    )


def nonstationary_single_instance(
    T: int, m: int, ell_opt: int, rho: float, rng: np.random.Generator,
    sigma: float = 1.0,
) -> Instance:
    """Single unit with drift and local dropouts in the outcome signal.

    alpha is piecewise constant on 8 equal pieces of [1, T], each level drawn
    U(0,1). beta_t = 1 + 0.2 U(0,1), zeroed whenever t falls in the final rho
    fraction of its length-ell_opt piece.
    """
    from .design import position_in_block
    from .graphs import build_graph

    if not (0.0 <= rho < 1.0):
        raise ValueError("rho must be in [0, 1)")
    g = build_graph(1, [])
    levels = rng.random(8)
    piece = np.minimum((np.arange(T) * 8) // T, 7)
    alpha = levels[piece][None, :]
    beta = 1.0 + 0.2 * rng.random((1, T))
    for t in range(1, T + 1):
        if position_in_block(t, ell_opt) > (1.0 - rho) * ell_opt:
            beta[0, t - 1] = 0.0
    return Instance(
        g,
        OwnArmWalkKernels(m),
        AffineOutcome(alpha, beta, m, noise_sigma=sigma),
        T,
    )


def multi_unit_instance(
    N: int, T: int, m: int, h: int, rng: np.random.Generator, sigma: float = 1.0,
) -> Instance:
    """Line-graph units whose walk drift follows the treated neighbor fraction.

    alpha is piecewise constant on an 8 x 8 grid of (N/8) x (T/8) pieces with
    independent U(0,1) levels; beta_it = 1 + 0.2 U(0,1).
    """
    from .graphs import line_graph

    g = line_graph(N, h)
    levels = rng.random((8, 8))
    row = np.minimum((np.arange(N) * 8) // N, 7)
    col = np.minimum((np.arange(T) * 8) // T, 7)
    alpha = levels[np.ix_(row, col)]
    beta = 1.0 + 0.2 * rng.random((N, T))
    return Instance(
        g,
        NeighborhoodFractionWalkKernels(m, h),
        AffineOutcome(alpha, beta, m, noise_sigma=sigma),
        T,
    )
