"""Closed-form bound calculators and exact numeric verification checks.

Each check_* routine computes both sides of one of the library's structural
inequalities or identities on a small instance where exact computation is
feasible, and returns a BoundReport. Exact checks use tolerance 1e-12;
envelope checks declare their slack in the report config.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .design import TimeBlocks, TreatmentMatrix
from .dynamics import (
    Instance,
    TabularKernel,
    estimate_tmix,
    evolve_distribution,
    total_variation,
)
from .exposure import ExposureSpec
from .graphs import Clustering, InterferenceGraph, cluster_degree, dependence_edges

EXACT_TOL = 1e-12


@dataclass
class BoundReport:
    name: str
    bound_value: float
    measured_value: float
    slack: float
    passed: bool
    config: dict = field(default_factory=dict)
    seed: int | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "name": self.name,
                "bound": self.bound_value,
                "measured": self.measured_value,
                "passed": bool(self.passed),
                "seed": self.seed,
                "config": self.config,
            },
            sort_keys=True,
        )


def write_reports_jsonl(reports, path) -> None:
    with open(path, "w") as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")


# ---------------------------------------------------------------------------
# Closed-form bound calculators
# ---------------------------------------------------------------------------


def bias_bound(r: int, t_mix: float) -> float:
    """Worst-case absolute bias of the radius-r truncated HT estimator."""
    if t_mix <= 0:
        raise ValueError("t_mix must be positive")
    return 2.0 * math.exp(-r / t_mix)


def variance_bound(
    g: InterferenceGraph,
    pi: Clustering,
    spec: ExposureSpec,
    t_mix: float,
    sigma: float,
    p_mins,
    T: int,
) -> float:
    """Variance bound with explicit constant 8.

    (8 (1+sigma^2) / N^2 T) * ( t_mix e^{-(ell+r)/t_mix} * sum_i d(i)
    + (r+ell) * sum over ordered dependent pairs of 1/(p_i p_j) ),
    where the pair sum runs over the dependence edges (self-pairs once,
    distinct pairs in both orientations).
    """
    p_mins = np.asarray(p_mins, dtype=float)
    if np.any(p_mins <= 0):
        raise ValueError("p_mins must be positive")
    N = g.n_units
    r, ell = spec.radius, spec.block_length
    deg_sum = sum(cluster_degree(g, pi, i) for i in range(N))
    pair_sum = sum(
        mult / (p_mins[i] * p_mins[j])
        for i, j, mult in dependence_edges(g, pi).ordered_pair_weights()
    )
    far = t_mix * math.exp(-(ell + r) / t_mix) * deg_sum if t_mix > 0 else 0.0
    return 8.0 * (1.0 + sigma**2) / (N**2 * T) * (far + (r + ell) * pair_sum)


def mse_bound(
    g: InterferenceGraph,
    pi: Clustering,
    spec: ExposureSpec,
    t_mix: float,
    sigma: float,
    N: int,
    T: int,
    p_mins,
) -> float:
    """Squared-bias plus variance bound at the rate-optimal window choice.

    Requires ell = r = ceil(t_mix * ln(NT)); composes the explicit bias
    constant 2 with the variance constant 8.
    """
    target = math.ceil(t_mix * math.log(N * T))
    if spec.radius != target or spec.block_length != target:
        raise ValueError(
            f"rate-optimal bound needs ell = r = ceil(t_mix ln(NT)) = {target}"
        )
    return bias_bound(spec.radius, t_mix) ** 2 + variance_bound(
        g, pi, spec, t_mix, sigma, p_mins, T
    )


# ---------------------------------------------------------------------------
# TV decay
# ---------------------------------------------------------------------------


def max_pair_tv_profile(k: TabularKernel, n_steps: int) -> np.ndarray:
    """Maximum pairwise TV distance between rows of k^s for s = 1..n_steps."""
    power = k.rows.copy()
    out = np.empty(n_steps)
    for s in range(n_steps):
        out[s] = 0.5 * float(
            np.abs(power[:, None, :] - power[None, :, :]).sum(axis=2).max()
        )
        power = power @ k.rows
    return out


def fitted_decay_envelope(k: TabularKernel, n_steps: int = 60) -> tuple[float, float]:
    """(t_fit, prefactor) such that the m-step max-pair contraction of k is
    dominated by prefactor * exp(-m / t_fit) over the profiled range.

    The prefactor absorbs the decay lag of kernels whose one-step Dobrushin
    coefficient is 1 (e.g. nearest-neighbor walks), where the bare fitted
    rate only describes the tail.
    """
    t_fit = estimate_tmix(k)
    profile = max_pair_tv_profile(k, n_steps)
    pref = max(
        1.0, max(d * math.exp((s + 1) / t_fit) for s, d in enumerate(profile))
    )
    return t_fit, pref


def check_tv_decay(
    kernels_a, kernels_b, f0a, f0b, m_window: int, t_mix: float | None = None
) -> BoundReport:
    """Exact-evolution check of geometric TV decay over a common window.

    The two kernel sequences must agree on their last m_window entries. The
    measured TV at the end is compared against the fitted-rate envelope
    prefactor * exp(-m_window / t_fit) times the TV at the window start, and
    TV must be exactly nonincreasing (1e-12 slack) across the common window.
    """
    if len(kernels_a) != len(kernels_b):
        raise ValueError("kernel sequences must have equal length")
    if m_window < 1 or m_window > len(kernels_a):
        raise ValueError("window must fit inside the sequences")
    common = kernels_a[-m_window:]
    for ka, kb in zip(common, kernels_b[-m_window:]):
        if ka is not kb and not np.array_equal(ka.rows, kb.rows):
            raise ValueError("sequences differ inside the common window")

    fa = evolve_distribution(f0a, kernels_a)
    fb = evolve_distribution(f0b, kernels_b)
    tvs = np.array([total_variation(x, y) for x, y in zip(fa, fb)])
    start = len(kernels_a) - m_window
    window_tvs = tvs[start:]
    monotone = bool(np.all(np.diff(window_tvs) <= EXACT_TOL))

    distinct = {id(k): k for k in common}.values()
    if t_mix is None:
        fits = [fitted_decay_envelope(k) for k in distinct]
        t_fit = max(f[0] for f in fits)
        pref = max(f[1] for f in fits)
    else:
        t_fit, pref = float(t_mix), 1.0
    bound = min(1.0, pref * math.exp(-m_window / t_fit)) * window_tvs[0]
    measured = float(window_tvs[-1])
    return BoundReport(
        name="tv_decay",
        bound_value=float(bound),
        measured_value=measured,
        slack=measured - bound,
        passed=monotone and measured <= bound + EXACT_TOL,
        config={
            "window": m_window,
            "t_fit": t_fit,
            "prefactor": pref,
            "anchor_tv": float(window_tvs[0]),
            "monotone": monotone,
        },
    )


# ---------------------------------------------------------------------------
# Conditional covariance identity
# ---------------------------------------------------------------------------


def random_cond_cov_pmf(rng: np.random.Generator, nx: int = 3, ny: int = 3):
    """Random joint law of (U, V, X, Y) satisfying the identity's preconditions.

    U, V are independent Bernoulli with dyadic means. Conditional on (u, v),
    the pair (X, Y) follows a coupling of per-u row margins and per-v column
    margins, built by a randomized corner rule on integer mass (total a power
    of two), so all stored probabilities are exact binary floats:
    X is independent of V given U, and Y independent of U given V.
    """
    total = 64
    p = rng.integers(1, 8) / 8.0
    q = rng.integers(1, 8) / 8.0

    def margins(k):
        cuts = np.sort(rng.choice(np.arange(1, total), size=k - 1, replace=False))
        return np.diff(np.concatenate(([0], cuts, [total]))).astype(int)

    row_m = [margins(nx) for _ in range(2)]  # per u
    col_m = [margins(ny) for _ in range(2)]  # per v

    def coupling(a, b):
        a, b = a.copy(), b.copy()
        table = np.zeros((len(a), len(b)), dtype=int)
        cells = [(i, j) for i in range(len(a)) for j in range(len(b))]
        rng.shuffle(cells)
        for i, j in cells:
            take = min(a[i], b[j])
            table[i, j] += take
            a[i] -= take
            b[j] -= take
        return table

    joint = np.zeros((2, 2, nx, ny))
    for u in range(2):
        for v in range(2):
            pu = p if u == 1 else 1 - p
            pv = q if v == 1 else 1 - q
            joint[u, v] = pu * pv * coupling(row_m[u], col_m[v]) / total
    x_values = rng.integers(-3, 4, size=nx).astype(float)
    y_values = rng.integers(-3, 4, size=ny).astype(float)
    return joint, x_values, y_values


def check_cond_cov(joint: np.ndarray, x_values, y_values) -> BoundReport:
    """Exhaustive-enumeration check of Cov(UX, VY) = pq Cov(X, Y | U=V=1).

    Validates that the supplied pmf satisfies U independent of V, X
    independent of V given U, and Y independent of U given V, then computes
    both sides by direct summation.
    """
    joint = np.asarray(joint, dtype=float)
    x_values = np.asarray(x_values, dtype=float)
    y_values = np.asarray(y_values, dtype=float)
    if abs(joint.sum() - 1.0) > 1e-9 or np.any(joint < 0):
        raise ValueError("joint pmf must be a distribution")

    uv = joint.sum(axis=(2, 3))
    pu, pv = uv.sum(axis=1), uv.sum(axis=0)
    if np.max(np.abs(uv - np.outer(pu, pv))) > 1e-10:
        raise ValueError("U and V must be independent")
    # X | (U=u, V=v) must not depend on v; Y | (U=u, V=v) must not depend on u
    for u in range(2):
        cond = [joint[u, v].sum(axis=1) / uv[u, v] for v in range(2) if uv[u, v] > 0]
        if len(cond) == 2 and np.max(np.abs(cond[0] - cond[1])) > 1e-10:
            raise ValueError("X is not independent of V given U")
    for v in range(2):
        cond = [joint[u, v].sum(axis=0) / uv[u, v] for u in range(2) if uv[u, v] > 0]
        if len(cond) == 2 and np.max(np.abs(cond[0] - cond[1])) > 1e-10:
            raise ValueError("Y is not independent of U given V")

    p, q = pu[1], pv[1]
    ux = np.array([0.0, 1.0])[:, None, None, None] * x_values[None, None, :, None]
    vy = np.array([0.0, 1.0])[None, :, None, None] * y_values[None, None, None, :]
    e_uxvy = float((joint * ux * vy).sum())
    e_ux = float((joint * ux).sum())
    e_vy = float((joint * vy).sum())
    lhs = e_uxvy - e_ux * e_vy

    g11 = joint[1, 1] / uv[1, 1]
    exy = float((g11 * np.outer(x_values, y_values)).sum())
    ex = float(g11.sum(axis=1) @ x_values)
    ey = float(g11.sum(axis=0) @ y_values)
    rhs = p * q * (exy - ex * ey)

    gap = abs(lhs - rhs)
    return BoundReport(
        name="cond_cov_identity",
        bound_value=EXACT_TOL,
        measured_value=gap,
        slack=gap - EXACT_TOL,
        passed=gap <= EXACT_TOL,
        config={"lhs": lhs, "rhs": rhs, "p": float(p), "q": float(q)},
    )


# ---------------------------------------------------------------------------
# Covariance of outcomes under design conditioning
# ---------------------------------------------------------------------------


def enumerate_switchback_designs(pi: Clustering, blocks: TimeBlocks):
    """Yield every realizable W with its probability under the design.

    Feasible only for small coin counts (n_clusters * n_blocks <= 22).
    """
    n_coins = pi.n_clusters * blocks.n_blocks
    if n_coins > 22:
        raise ValueError(f"{n_coins} coins is too many to enumerate")
    col = np.empty(blocks.horizon, dtype=np.int64)
    for k, (lo, hi) in enumerate(blocks.blocks):
        col[lo - 1 : hi] = k
    prob = 0.5**n_coins
    for bits in itertools.product((0, 1), repeat=n_coins):
        coins = np.array(bits, dtype=np.int8).reshape(
            pi.n_clusters, blocks.n_blocks
        )
        yield TreatmentMatrix(coins[pi.assignment][:, col]), prob


def _kernel_sequence(instance: Instance, Wv: np.ndarray, i: int, upto: int):
    nb = instance.graph.neighborhoods[i]
    return [
        instance.kernels.kernel(i, s, Wv[nb, s - 1]) for s in range(1, upto)
    ]


def _mean_grid(instance: Instance, Wv: np.ndarray, i: int, t: int) -> np.ndarray:
    from .dynamics import _mean_vector

    nb = instance.graph.neighborhoods[i]
    values = np.asarray(instance.kernels.state_values)
    return _mean_vector(instance.outcomes, i, t, values, Wv[nb, t - 1])


def _pair_moments_fixed_w(
    instance: Instance, Wv: np.ndarray, i: int, i2: int, t: int, t2: int
):
    """(E[Y_it], E[Y_i2t2], E[Y_it * Y_i2t2]) exactly, for a fixed assignment.

    Uses per-unit distribution evolution; the cross-unit case factorizes by
    conditional independence given W, and the same-unit case propagates each
    conditional point mass across the gap. Uncorrelated noise contributes
    sigma^2 only on the diagonal (i == i2, t == t2).
    """
    if (i, t) == (i2, t2):
        dists = evolve_distribution(
            instance.initial[i], _kernel_sequence(instance, Wv, i, t)
        )
        mu = _mean_grid(instance, Wv, i, t)
        m1 = float(dists[-1] @ mu)
        second = float(dists[-1] @ (mu**2)) + instance.outcomes.noise_sigma**2
        return m1, m1, second
    if i != i2:
        da = evolve_distribution(
            instance.initial[i], _kernel_sequence(instance, Wv, i, t)
        )
        db = evolve_distribution(
            instance.initial[i2], _kernel_sequence(instance, Wv, i2, t2)
        )
        ma = float(da[-1] @ _mean_grid(instance, Wv, i, t))
        mb = float(db[-1] @ _mean_grid(instance, Wv, i2, t2))
        return ma, mb, ma * mb
    # same unit, distinct rounds: order so ta < tb
    (ta, tb) = (t, t2) if t < t2 else (t2, t)
    dists = evolve_distribution(
        instance.initial[i], _kernel_sequence(instance, Wv, i, ta)
    )
    fa = dists[-1]
    mu_a = _mean_grid(instance, Wv, i, ta)
    mu_b = _mean_grid(instance, Wv, i, tb)
    prop = np.eye(fa.size)
    nb = instance.graph.neighborhoods[i]
    for s in range(ta, tb):
        prop = prop @ instance.kernels.kernel(i, s, Wv[nb, s - 1]).rows
    ma = float(fa @ mu_a)
    mb = float((fa @ prop) @ mu_b)
    cross = float((fa * mu_a) @ prop @ mu_b)
    if t < t2:
        return ma, mb, cross
    return mb, ma, cross


def check_cov_outcomes(
    instance: Instance,
    pi: Clustering,
    blocks: TimeBlocks,
    event,
    i: int,
    i2: int,
    t: int,
    t2: int,
    t_mix: float,
) -> BoundReport:
    """Exact check that Cov_A(Y_it, Y_i2t2) <= exp(-|t - t2| / t_mix).

    The conditioning event A is a predicate on treatment matrices; the design
    support is enumerated exhaustively, so the conditional covariance is
    exact (no Monte Carlo error). Requires a tiny instance and design.
    """
    pw, pa, pb, pab = 0.0, 0.0, 0.0, 0.0
    for W, prob in enumerate_switchback_designs(pi, blocks):
        if event is not None and not event(W.values):
            continue
        ma, mb, mab = _pair_moments_fixed_w(instance, W.values, i, i2, t, t2)
        pw += prob
        pa += prob * ma
        pb += prob * mb
        pab += prob * mab
    if pw <= 0:
        raise ValueError("conditioning event has probability zero")
    measured = pab / pw - (pa / pw) * (pb / pw)
    bound = math.exp(-abs(t - t2) / t_mix)
    return BoundReport(
        name="cov_outcomes",
        bound_value=bound,
        measured_value=measured,
        slack=measured - bound,
        passed=measured <= bound + EXACT_TOL,
        config={"i": i, "i2": i2, "t": t, "t2": t2, "event_mass": pw},
    )


# ---------------------------------------------------------------------------
# Initial-state insensitivity
# ---------------------------------------------------------------------------


def check_initial_state(
    instance: Instance, d0, d1, arm: int = 1, t_mix: float | None = None
) -> BoundReport:
    """Exact decay check of the mean-outcome gap between two initial laws.

    Evolves both initial distributions under the constant-arm policy, records
    gap_t = |E_D[Y_t] - E_D'[Y_t]| averaged over units, and requires the gap
    to be nonincreasing after the mixing onset with a log-linear decay slope
    at most -0.8 / t_fit (20% tolerance on the fitted rate).
    """
    from .dynamics import _mean_vector

    g = instance.graph
    T = instance.horizon
    values = np.asarray(instance.kernels.state_values)
    d0 = np.asarray(d0, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    gaps = np.zeros(T)
    for i in range(g.n_units):
        w = np.full(g.neighborhoods[i].size, arm, dtype=np.int8)
        fa, fb = d0, d1
        for t in range(1, T + 1):
            mu = _mean_vector(instance.outcomes, i, t, values, w)
            gaps[t - 1] += abs(float((fa - fb) @ mu)) / g.n_units
            if t < T:
                k = instance.kernels.kernel(i, t, w).rows
                fa, fb = fa @ k, fb @ k

    if gaps.max() <= 1e-14:
        return BoundReport(
            name="initial_state",
            bound_value=0.0,
            measured_value=0.0,
            slack=0.0,
            passed=True,
            config={"note": "gap identically zero"},
        )

    if t_mix is None:
        ws = np.full(g.neighborhoods[0].size, arm, dtype=np.int8)
        t_mix = estimate_tmix(instance.kernels.kernel(0, 1, ws))
    peak = int(np.argmax(gaps))
    below = np.flatnonzero(gaps <= 0.5 * gaps.max())
    onset = max(math.ceil(t_mix), peak + 1, below[0] + 1 if below.size else T)
    tail = gaps[onset - 1 :]
    monotone = bool(np.all(np.diff(tail) <= EXACT_TOL))
    pos = np.flatnonzero(tail > 1e-14)
    if pos.size >= 3:
        slope = float(
            np.polyfit(onset + pos.astype(float), np.log(tail[pos]), 1)[0]
        )
    else:
        slope = -math.inf  # gap already collapsed below resolution
    required = -0.8 / t_mix
    return BoundReport(
        name="initial_state",
        bound_value=required,
        measured_value=slope,
        slack=slope - required,
        passed=monotone and slope <= required,
        config={"onset": onset, "t_fit": t_mix, "monotone": monotone,
                "final_gap": float(gaps[-1])},
    )
