"""Canned verification batch behind the verify-bounds command.

Exact checks (TV decay, conditional-covariance identity, design-conditioned
outcome covariances, initial-state insensitivity, the entropy exposure bound)
run at tolerance 1e-12; statistical checks (HT-term covariances, bias and
variance dominance) run seeded replications and allow 3 standard errors.
"""

from __future__ import annotations

import math

import numpy as np

from .bounds import (
    BoundReport,
    bias_bound,
    check_cond_cov,
    check_cov_outcomes,
    check_initial_state,
    check_tv_decay,
    random_cond_cov_pmf,
    variance_bound,
)
from .design import sample_switchback, time_blocks
from .dynamics import (
    NeighborhoodFractionWalkKernels,
    clipped_random_walk_kernel,
    estimate_tmix,
    gate_oracle,
    multi_unit_instance,
    simulate_panel,
    stationary_instance,
)
from .estimators import ht_truncated
from .exposure import (
    ExposureSpec,
    exposure_indicator_matrix,
    exposure_lower_bound,
    exposure_probabilities,
    min_exposure_probability,
)
from .graphs import build_graph, singleton_clustering


def _tv_decay_reports() -> list[BoundReport]:
    k1 = clipped_random_walk_kernel(3, 0.9)
    k0 = clipped_random_walk_kernel(3, 0.1)
    reports = []
    for window in (5, 10, 20):
        prefix = 8
        seq_a = [k1] * (prefix + window)
        seq_b = [k0] * prefix + [k1] * window
        f0 = np.zeros(7)
        f0[3] = 1.0
        rep = check_tv_decay(seq_a, seq_b, f0, f0, window)
        rep.config["scenario"] = f"walk-m3-window{window}"
        reports.append(rep)
    return reports


def _cond_cov_reports(rng, n_cases: int = 50) -> list[BoundReport]:
    reports = []
    for case in range(n_cases):
        joint, xs, ys = random_cond_cov_pmf(rng)
        rep = check_cond_cov(joint, xs, ys)
        rep.config["case"] = case
        reports.append(rep)
    return reports


def _star_line_instance(T: int = 24, m: int = 2, h: int = 1, sigma: float = 0.0):
    """Two line-adjacent units with neighbor-fraction walks and [0,1] outcomes."""
    from .dynamics import AffineOutcome, Instance
    from .graphs import line_graph

    g = line_graph(2, h)
    alpha = np.full((2, T), 0.5)
    beta = np.full((2, T), 0.5)
    kernels = NeighborhoodFractionWalkKernels(m, h)
    return Instance(g, kernels, AffineOutcome(alpha, beta, m, noise_sigma=sigma), T)


def _cov_outcomes_reports() -> list[BoundReport]:
    instance = _star_line_instance()
    pi = singleton_clustering(2)
    blocks = time_blocks(instance.horizon, 8)
    kernel = instance.kernels.kernel(0, 1, (1, 1))
    t_mix = estimate_tmix(kernel)
    reports = []
    for gap in (1, 2, 4, 8):
        rep = check_cov_outcomes(
            instance, pi, blocks, None, 0, 0, 10, 10 + gap, t_mix
        )
        rep.config["scenario"] = f"same-unit-gap{gap}"
        reports.append(rep)
    rep = check_cov_outcomes(instance, pi, blocks, None, 0, 1, 10, 12, t_mix)
    rep.config["scenario"] = "cross-unit"
    reports.append(rep)
    # conditioning on an exposure-style event: first block all-treated for unit 0
    event = lambda Wv: bool(Wv[0, :8].all())
    rep = check_cov_outcomes(instance, pi, blocks, event, 0, 0, 10, 14, t_mix)
    rep.config["scenario"] = "same-unit-conditioned"
    reports.append(rep)
    return reports


def _initial_state_report() -> BoundReport:
    instance = _star_line_instance(T=30)
    n = instance.kernels.n_states
    d0 = np.zeros(n)
    d0[0] = 1.0
    d1 = np.zeros(n)
    d1[-1] = 1.0
    rep = check_initial_state(instance, d0, d1)
    rep.config["scenario"] = "point-masses-at-caps"
    return rep


def _exposure_bound_reports() -> list[BoundReport]:
    reports = []
    ell = 4
    for delta in (0.0, 0.1, 0.2, 0.4):
        for d in range(1, 7):
            if abs(delta * d - round(delta * d)) > 1e-9:
                continue
            g = build_graph(d, [(0, j) for j in range(1, d)])
            pi = singleton_clustering(d)
            for c in (0, 1, 2):
                r = c * ell
                T = ell * (3 + c)
                spec = ExposureSpec(r, delta, ell, pi)
                exact = min_exposure_probability(g, spec, T, 0)
                bound = exposure_lower_bound(d, r, ell, delta)
                reports.append(
                    BoundReport(
                        name="exposure_lower_bound",
                        bound_value=bound,
                        measured_value=exact,
                        slack=bound - exact,
                        passed=exact >= bound - 1e-12,
                        config={"delta": delta, "d": d, "window_blocks": 1 + c},
                    )
                )
    return reports


def _ht_term_covariance(instance, pi, ell, r, pairs, n_draws, seed):
    """Empirical covariances of materialized HT terms plus their SEs."""
    g = instance.graph
    T = instance.horizon
    blocks = time_blocks(T, ell)
    spec = ExposureSpec(r, 0.0, ell, pi)
    probs = exposure_probabilities(g, spec, T)
    samples = {pair: [] for pair in pairs}
    for j in range(n_draws):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(j,)))
        W = sample_switchback(pi, blocks, rng)
        panel = simulate_panel(instance, W, rng)
        out = ht_truncated(panel, g, spec, probs, materialize_terms=True)
        for (i, t, i2, t2) in pairs:
            samples[(i, t, i2, t2)].append(
                (out.terms[i, t - 1], out.terms[i2, t2 - 1])
            )
    results = {}
    for pair, vals in samples.items():
        a = np.array([v[0] for v in vals])
        b = np.array([v[1] for v in vals])
        prod = (a - a.mean()) * (b - b.mean())
        results[pair] = (float(prod.mean()), float(prod.std() / math.sqrt(len(vals))))
    return results, probs, spec


def _ht_covariance_reports(seed: int) -> list[BoundReport]:
    instance = _star_line_instance(T=24, m=1, h=1, sigma=0.5)
    pi = singleton_clustering(2)
    ell, r = 4, 2
    sigma = instance.outcomes.noise_sigma
    close_pair = (0, 9, 1, 10)
    far_pair = (0, 2, 0, 18)
    covs, probs, spec = _ht_term_covariance(
        instance, pi, ell, r, [close_pair, far_pair], n_draws=4000, seed=seed
    )
    kernels = [instance.kernels.kernel(0, 1, w) for w in ((0, 0), (0, 1), (1, 1))]
    t_mix = max(estimate_tmix(k) for k in kernels)
    reports = []

    i, t, i2, t2 = close_pair
    measured, se = covs[close_pair]
    bound = 4 * (1 + sigma**2) / (probs.p(i, t) * probs.p(i2, t2))
    reports.append(BoundReport(
        name="ht_close_by_cov",
        bound_value=bound,
        measured_value=measured,
        slack=measured - bound,
        passed=measured <= bound + 3 * se,
        config={"pair": close_pair, "se": se},
        seed=seed,
    ))

    i, t, i2, t2 = far_pair
    measured, se = covs[far_pair]
    bound = 4 * math.exp(-abs(t2 - t) / t_mix)
    reports.append(BoundReport(
        name="ht_far_apart_cov",
        bound_value=bound,
        measured_value=measured,
        slack=measured - bound,
        passed=measured <= bound + 3 * se,
        config={"pair": far_pair, "se": se, "t_mix": t_mix},
        seed=seed,
    ))
    return reports


def _bias_variance_reports(seed: int) -> list[BoundReport]:
    m, T, ell, r = 3, 40, 4, 4
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    instance = stationary_instance(1, T, m, rng, sigma=0.0, clamp=True)
    pi = singleton_clustering(1)
    blocks = time_blocks(T, ell)
    spec = ExposureSpec(r, 0.0, ell, pi)
    probs = exposure_probabilities(instance.graph, spec, T)
    t_mix = estimate_tmix(clipped_random_walk_kernel(m, 0.9))
    gate = gate_oracle(instance)
    n_draws = 4000
    ests = np.empty(n_draws)
    for j in range(n_draws):
        rng_j = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(8, j)))
        W = sample_switchback(pi, blocks, rng_j)
        panel = simulate_panel(instance, W, rng_j)
        ests[j] = ht_truncated(panel, instance.graph, spec, probs).delta_hat
    se = float(ests.std() / math.sqrt(n_draws))
    measured_bias = abs(float(ests.mean()) - gate)
    b_bound = bias_bound(r, t_mix)
    var_measured = float(ests.var())
    sq = (ests - ests.mean()) ** 2
    var_se = float(sq.std() / math.sqrt(n_draws))
    v_bound = variance_bound(
        instance.graph, pi, spec, t_mix, 0.0, probs.p_min, T
    )
    return [
        BoundReport(
            name="bias_bound",
            bound_value=b_bound,
            measured_value=measured_bias,
            slack=measured_bias - b_bound,
            passed=measured_bias <= b_bound + 3 * se,
            config={"r": r, "t_mix": t_mix, "se": se},
            seed=seed,
        ),
        BoundReport(
            name="variance_bound",
            bound_value=v_bound,
            measured_value=var_measured,
            slack=var_measured - v_bound,
            passed=var_measured <= v_bound + 3 * var_se,
            config={"ell": ell, "r": r, "se": var_se},
            seed=seed,
        ),
    ]


def verification_batch(seed: int = 0) -> list[BoundReport]:
    """All verification checks, each reproducible from (seed, config)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(42,)))
    reports = []
    reports.extend(_tv_decay_reports())
    reports.extend(_cond_cov_reports(rng))
    reports.extend(_cov_outcomes_reports())
    reports.append(_initial_state_report())
    reports.extend(_exposure_bound_reports())
    reports.extend(_ht_covariance_reports(seed))
    reports.extend(_bias_variance_reports(seed))
    for rep in reports:
        if rep.seed is None:
            rep.seed = seed
    return reports
