"""Configuration ingestion, seeded replication loops, aggregation, and presets.

A replication run draws instances and treatment matrices from streams derived
with numpy SeedSequence spawn keys, so results are identical for any worker
count: instance k uses spawn key (0, k), draw j of instance k uses
(1, k, j), and aggregation folds in (instance, draw) index order.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .design import sample_switchback, time_blocks
from .dynamics import (
    gate_oracle,
    multi_unit_instance,
    nonstationary_single_instance,
    simulate_panel,
    stationary_instance,
)
from .estimators import EstimatorUndefinedError, dim, dimbi, ht_truncated
from .exposure import ExposureSpec, exposure_probabilities
from .graphs import (
    one_hop_max_clustering,
    segments_clustering,
    singleton_clustering,
    whole_clustering,
    lattice_uniform_clustering,
)


@dataclass(frozen=True)
class EstimatorSpec:
    """One estimator to evaluate: kind 'ht' (needs r), 'dim', or 'dimbi' (needs b)."""

    kind: str
    name: str
    r: int | None = None
    b: int | None = None
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ht", "dim", "dimbi"):
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.kind == "ht" and (self.r is None or self.r < 0):
            raise ValueError("ht estimator needs a radius r >= 0")
        if self.kind == "dimbi" and (self.b is None or self.b < 0):
            raise ValueError("dimbi estimator needs a burn-in b >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    instance: dict
    design: dict
    estimators: tuple
    n_instances: int
    n_draws: int
    seed: int
    out: str | None = None

    def __post_init__(self):
        if self.n_instances < 1 or self.n_draws < 1:
            raise ValueError("replication counts must be >= 1")
        _instance_builder(self.instance)  # validates generator name
        _clustering_name(self.design)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["estimators"] = [asdict(e) for e in self.estimators]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        ests = tuple(EstimatorSpec(**e) for e in doc["estimators"])
        fields = {k: doc[k] for k in ("scenario", "instance", "design",
                                      "n_instances", "n_draws", "seed")}
        return cls(estimators=ests, out=doc.get("out"), **fields)

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ResultRow:
    scenario: str
    estimator: str
    N: int
    T: int
    ell: int
    r: int | None
    b: int | None
    n_instances: int
    n_draws: int
    gate: float
    mse: float
    bias: float
    bias_ci95: float
    variance: float
    retained_frac: float
    dropped_draws: int
    seed: int


@dataclass
class ReplicationReport:
    config: ExperimentConfig
    rows: list = field(default_factory=list)


def _instance_builder(spec: dict):
    gens = {
        "stationary": _gen_stationary,
        "nonstationary_single": _gen_nonstationary,
        "multi_unit": _gen_multi_unit,
    }
    name = spec.get("generator")
    if name not in gens:
        raise ValueError(f"unknown instance generator {name!r}")
    return gens[name]


def _gen_stationary(spec, rng):
    return stationary_instance(
        spec.get("N", 1), spec["T"], spec["m"], rng,
        sigma=spec.get("sigma", 1.0), clamp=spec.get("clamp", False),
    )


def _gen_nonstationary(spec, rng):
    return nonstationary_single_instance(
        spec["T"], spec["m"], spec["ell_opt"], spec.get("rho", 0.25), rng,
        sigma=spec.get("sigma", 1.0),
    )


def _gen_multi_unit(spec, rng):
    return multi_unit_instance(
        spec["N"], spec["T"], spec["m"], spec.get("h", 2), rng,
        sigma=spec.get("sigma", 1.0),
    )


def _clustering_name(design: dict) -> str:
    name = design.get("clustering")
    if name not in ("singleton", "whole", "segments", "lattice_uniform",
                    "one_hop_max"):
        raise ValueError(f"unknown clustering constructor {name!r}")
    if "ell" not in design or design["ell"] < 1:
        raise ValueError("design needs a block length ell >= 1")
    return name


def _build_clustering(design: dict, graph, rng):
    name = _clustering_name(design)
    n = graph.n_units
    if name == "singleton":
        return singleton_clustering(n)
    if name == "whole":
        return whole_clustering(n)
    if name == "segments":
        return segments_clustering(n, design["w"])
    if name == "lattice_uniform":
        return lattice_uniform_clustering(design["side"], design["s"])
    return one_hop_max_clustering(graph, rng)


def _run_instance_task(args):
    """Replications for one instance index; pure function of (config, index)."""
    cfg, inst_idx = args
    rng_inst = np.random.default_rng(
        np.random.SeedSequence(cfg.seed, spawn_key=(0, inst_idx))
    )
    instance = _instance_builder(cfg.instance)(cfg.instance, rng_inst)
    graph = instance.graph
    clustering = _build_clustering(cfg.design, graph, rng_inst)
    T = instance.horizon
    ell = cfg.design["ell"]
    blocks = time_blocks(T, ell)

    ht_specs = {}
    for est in cfg.estimators:
        if est.kind == "ht":
            spec = ExposureSpec(est.r, est.delta, ell, clustering)
            ht_specs[est.name] = (spec, exposure_probabilities(graph, spec, T))

    gate = gate_oracle(instance)
    estimates = {e.name: [] for e in cfg.estimators}
    retained = {e.name: [] for e in cfg.estimators}
    dropped = {e.name: 0 for e in cfg.estimators}
    for j in range(cfg.n_draws):
        rng = np.random.default_rng(
            np.random.SeedSequence(cfg.seed, spawn_key=(1, inst_idx, j))
        )
        W = sample_switchback(clustering, blocks, rng)
        panel = simulate_panel(instance, W, rng)
        for est in cfg.estimators:
            try:
                if est.kind == "ht":
                    spec, probs = ht_specs[est.name]
                    out = ht_truncated(panel, graph, spec, probs)
                    estimates[est.name].append(out.delta_hat)
                    retained[est.name].append(out.retained_fraction)
                else:
                    out = dim(panel, ell) if est.kind == "dim" else dimbi(
                        panel, ell, est.b
                    )
                    estimates[est.name].append(out.delta_hat)
                    retained[est.name].append(
                        (out.n_treated_used + out.n_control_used) / T
                    )
            except EstimatorUndefinedError:
                dropped[est.name] += 1
    return gate, estimates, retained, dropped


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ReplicationReport:
    """Run all replications of one configuration and aggregate per estimator.

    Per-draw errors are measured against each instance's own exact GATE.
    mse = mean(err^2), bias = mean(err), variance = mse - bias^2 over the
    pooled sample, so the identity mse = bias^2 + variance is exact. Draws on
    which an estimator is undefined are dropped and counted, never imputed.
    An estimator with zero successful draws raises EstimatorUndefinedError.
    """
    tasks = [(cfg, k) for k in range(cfg.n_instances)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_instance_task, tasks))
    else:
        results = [_run_instance_task(t) for t in tasks]

    report = ReplicationReport(config=cfg)
    gates = np.array([res[0] for res in results])
    for est in cfg.estimators:
        errors, rets, drop = [], [], 0
        for gate, estimates, retained, dropped in results:
            errors.extend(e - gate for e in estimates[est.name])
            rets.extend(retained[est.name])
            drop += dropped[est.name]
        if not errors:
            raise EstimatorUndefinedError(
                f"estimator {est.name} produced no value on any draw"
            )
        err = np.array(errors)
        mse = float(np.mean(err**2))
        bias = float(np.mean(err))
        variance = mse - bias**2
        ci = 1.96 * math.sqrt(variance / err.size)
        report.rows.append(
            ResultRow(
                scenario=cfg.scenario,
                estimator=est.name,
                N=int(cfg.instance.get("N", 1)),
                T=int(cfg.instance["T"]),
                ell=int(cfg.design["ell"]),
                r=est.r,
                b=(0 if est.kind == "dim" else est.b),
                n_instances=cfg.n_instances,
                n_draws=cfg.n_draws,
                gate=float(np.mean(gates)),
                mse=mse,
                bias=bias,
                bias_ci95=ci,
                variance=variance,
                retained_frac=float(np.mean(rets)) if rets else 0.0,
                dropped_draws=drop,
                seed=cfg.seed,
            )
        )
    return report


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

DESK_SINGLE = (20, 50)
FULL_SINGLE = (100, 100)
DESK_MULTI = (20, 50)
FULL_MULTI = (100, 200)


def rate_optimal_length(m: int, scale: int, base: str = "e") -> int:
    """ceil(m * log(scale)): the rate-optimal block length / radius."""
    log = math.log(scale) if base == "e" else math.log10(scale)
    return max(1, math.ceil(m * log))


def preset_single_unit(
    T: int, scenario: str, m: int = 30, counts=DESK_SINGLE, seed: int = 0,
    log_base: str = "e",
) -> list[ExperimentConfig]:
    """The five single-unit benchmark design/estimator combinations.

    HT-OPT, DIM, and DIMBI share the rate-optimal block length
    ell_opt = ceil(m ln T); HT-small uses ell = 8 with r = 24; HT-large uses
    ell = T / 8 with the rate-optimal radius.
    """
    if scenario not in ("stationary", "nonstationary"):
        raise ValueError("scenario must be stationary or nonstationary")
    if T < 64:
        raise ValueError("single-unit presets need T >= 64")
    ell_opt = rate_optimal_length(m, T, log_base)
    n_inst, n_draws = counts

    def instance_spec():
        if scenario == "stationary":
            return {"generator": "stationary", "N": 1, "T": T, "m": m,
                    "sigma": 1.0}
        return {"generator": "nonstationary_single", "T": T, "m": m,
                "ell_opt": ell_opt, "rho": 0.25, "sigma": 1.0}

    def cfg(tag, ell, estimators):
        return ExperimentConfig(
            scenario=f"single-{scenario}-T{T}-{tag}",
            instance=instance_spec(),
            design={"clustering": "singleton", "ell": ell},
            estimators=tuple(estimators),
            n_instances=n_inst,
            n_draws=n_draws,
            seed=seed,
        )

    return [
        cfg("opt", ell_opt, [
            EstimatorSpec("ht", "HT-OPT", r=ell_opt),
            EstimatorSpec("dim", "DIM"),
            EstimatorSpec("dimbi", "DIMBI", b=ell_opt // 2),
        ]),
        cfg("small", 8, [EstimatorSpec("ht", "HT-small", r=24)]),
        cfg("large", max(1, T // 8), [EstimatorSpec("ht", "HT-large", r=ell_opt)]),
    ]


def preset_multi_unit(
    scaling: str, size: int, m: int = 30, h: int = 2, counts=DESK_MULTI,
    seed: int = 0,
) -> list[ExperimentConfig]:
    """Pure switchback, pure A/B, and clustered switchback on the line graph.

    scaling picks (N, T): 'N=T' -> (size, size); 'N=sqrtT' -> (size, size^2);
    'T=sqrtN' -> (size^2, size). Spatial clusters are contiguous width-w
    segments; the rate-optimal length and radius use coefficient m.
    """
    if scaling == "N=T":
        N, T = size, size
    elif scaling == "N=sqrtT":
        N, T = size, size * size
    elif scaling == "T=sqrtN":
        N, T = size * size, size
    else:
        raise ValueError(f"unknown scaling {scaling!r}")
    ell_opt = rate_optimal_length(m, T)
    r = rate_optimal_length(m, N * T)
    n_inst, n_draws = counts
    instance = {"generator": "multi_unit", "N": N, "T": T, "m": m, "h": h,
                "sigma": 1.0}

    def cfg(tag, design):
        return ExperimentConfig(
            scenario=f"multi-{scaling}-size{size}-{tag}",
            instance=instance,
            design=design,
            estimators=(EstimatorSpec("ht", f"HT-{tag}", r=r),),
            n_instances=n_inst,
            n_draws=n_draws,
            seed=seed,
        )

    return [
        cfg("pure-switchback", {"clustering": "whole", "ell": ell_opt}),
        cfg("pure-ab", {"clustering": "segments", "w": h, "ell": T}),
        cfg("clustered", {"clustering": "segments", "w": h, "ell": ell_opt}),
    ]


PRESET_NAMES = (
    "mse-single-stationary",
    "mse-single-nonstationary",
    "scaling-NT",
    "scaling-NsqrtT",
    "scaling-TsqrtN",
    "mse-vs-m",
)


def preset_by_name(
    name: str, seed: int = 0, full_scale: bool = False, sizes=None,
    m: int | None = None, h: int = 2,
) -> list[ExperimentConfig]:
    """Figure-reproduction presets; sizes and the walk cap m are overridable."""
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    configs: list[ExperimentConfig] = []
    if name in ("mse-single-stationary", "mse-single-nonstationary"):
        scenario = "nonstationary" if "nonstationary" in name else "stationary"
        counts = FULL_SINGLE if full_scale else DESK_SINGLE
        for T in sizes or (512, 1024, 2048, 4096):
            configs.extend(
                preset_single_unit(T, scenario, m=m or 30, counts=counts, seed=seed)
            )
    elif name.startswith("scaling-"):
        scaling = {"scaling-NT": "N=T", "scaling-NsqrtT": "N=sqrtT",
                   "scaling-TsqrtN": "T=sqrtN"}[name]
        counts = FULL_MULTI if full_scale else DESK_MULTI
        for size in sizes or (32, 64, 128):
            configs.extend(
                preset_multi_unit(scaling, size, m=m or 30, h=h, counts=counts,
                                  seed=seed)
            )
    else:  # mse-vs-m
        counts = FULL_SINGLE if full_scale else DESK_SINGLE
        T = (sizes or (512,))[0]
        for cap in (10, 30, 100):
            configs.extend(
                preset_single_unit(T, "stationary", m=cap, counts=counts, seed=seed)
            )
    return configs


# ---------------------------------------------------------------------------
# Aggregate outputs
# ---------------------------------------------------------------------------

CSV_HEADER = (
    "scenario,estimator,N,T,ell,r,b,n_instances,n_draws,gate,mse,bias,"
    "bias_ci95,variance,retained_frac,dropped_draws,seed"
)


def loglog_slope(points) -> float:
    """OLS slope of ln y against ln x; requires positive coordinates."""
    xs = np.array([p[0] for p in points], dtype=float)
    ys = np.array([p[1] for p in points], dtype=float)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log slope needs strictly positive points")
    if np.unique(xs).size < 2:
        raise ValueError("need at least two distinct x values")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def emit_results(reports, path) -> None:
    """Plot-ready CSV (10 significant digits) plus a config-provenance sidecar.

    The sidecar JSON lands at <path>.config.json. Re-running with the same
    configs and seed reproduces both files byte for byte.
    """
    reports = list(reports)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for rep in reports:
            for row in rep.rows:
                writer.writerow([
                    row.scenario, row.estimator, row.N, row.T, row.ell,
                    _fmt(row.r), _fmt(row.b), row.n_instances, row.n_draws,
                    _fmt(row.gate), _fmt(row.mse), _fmt(row.bias),
                    _fmt(row.bias_ci95), _fmt(row.variance),
                    _fmt(row.retained_frac), row.dropped_draws, row.seed,
                ])
    sidecar = f"{path}.config.json"
    with open(sidecar, "w") as fh:
        json.dump([rep.config.to_dict() for rep in reports], fh,
                  sort_keys=True, indent=2)
        fh.write("\n")
