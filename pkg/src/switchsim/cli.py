"""Command-line interface.

Commands:
    simulate       run one JSON config file and emit the result CSV
    preset         run a named figure preset
    verify-bounds  run the bound/lemma verification batch (JSON lines)
    gate           print the exact GATE for a config
    exposure       dump exact exposure probabilities as CSV

Exit codes: 0 success, 1 validation failure (including failed bound checks),
2 estimator-undefined condition.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .estimators import EstimatorUndefinedError


def _add_common(p):
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--out", default=None, help="output path")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="switchsim",
        description="Clustered switchback experiment simulator and estimator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one config file")
    p.add_argument("--config", required=True)
    _add_common(p)

    p = sub.add_parser("preset", help="run a named figure preset")
    p.add_argument("name")
    _add_common(p)
    p.add_argument("--full-scale", action="store_true",
                   help="paper-scale replication counts")
    p.add_argument("--sizes", default=None,
                   help="comma-separated size sweep override")
    p.add_argument("--m", type=int, default=None, help="walk cap override")

    p = sub.add_parser("verify-bounds", help="bound verification batch")
    _add_common(p)

    p = sub.add_parser("gate", help="print the exact GATE of a config")
    p.add_argument("--config", required=True)
    _add_common(p)

    p = sub.add_parser("exposure", help="dump exposure probabilities")
    p.add_argument("--config", required=True)
    _add_common(p)
    return parser


def _load_config(path, seed_override):
    from .harness import ExperimentConfig

    cfg = ExperimentConfig.from_json_file(path)
    if seed_override is not None:
        doc = cfg.to_dict()
        doc["seed"] = seed_override
        cfg = ExperimentConfig.from_dict(doc)
    return cfg


def _cmd_simulate(args) -> int:
    from .harness import emit_results, run_experiment

    cfg = _load_config(args.config, args.seed)
    report = run_experiment(cfg, workers=args.workers)
    out = args.out or cfg.out or "results.csv"
    emit_results([report], out)
    print(f"wrote {out}")
    return 0


def _cmd_preset(args) -> int:
    from .harness import emit_results, preset_by_name, run_experiment

    sizes = None
    if args.sizes:
        sizes = tuple(int(s) for s in args.sizes.split(","))
    configs = preset_by_name(
        args.name, seed=args.seed or 0, full_scale=args.full_scale,
        sizes=sizes, m=args.m,
    )
    reports = [run_experiment(cfg, workers=args.workers) for cfg in configs]
    out = args.out or f"{args.name}.csv"
    emit_results(reports, out)
    print(f"wrote {out}")
    return 0


def _cmd_verify_bounds(args) -> int:
    from .verification import verification_batch
    from .bounds import write_reports_jsonl

    reports = verification_batch(seed=args.seed or 0)
    out = args.out or "bound_reports.jsonl"
    write_reports_jsonl(reports, out)
    n_fail = sum(1 for r in reports if not r.passed)
    for r in reports:
        status = "pass" if r.passed else "FAIL"
        print(f"{status}  {r.name}: measured={r.measured_value:.6g} "
              f"bound={r.bound_value:.6g}")
    print(f"wrote {out} ({len(reports)} checks, {n_fail} failed)")
    return 1 if n_fail else 0


def _build_instance_and_design(args):
    from .harness import _build_clustering, _instance_builder

    cfg = _load_config(args.config, args.seed)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0, 0)))
    instance = _instance_builder(cfg.instance)(cfg.instance, rng)
    clustering = _build_clustering(cfg.design, instance.graph, rng)
    return cfg, instance, clustering


def _cmd_gate(args) -> int:
    from .dynamics import gate_oracle

    _, instance, _ = _build_instance_and_design(args)
    print(f"{gate_oracle(instance):.10g}")
    return 0


def _cmd_exposure(args) -> int:
    from .exposure import ExposureSpec, exposure_probabilities

    cfg, instance, clustering = _build_instance_and_design(args)
    radius = next((e.r for e in cfg.estimators if e.kind == "ht"), 0)
    delta = next((e.delta for e in cfg.estimators if e.kind == "ht"), 0.0)
    spec = ExposureSpec(radius, delta, cfg.design["ell"], clustering)
    probs = exposure_probabilities(instance.graph, spec, instance.horizon)
    out = args.out or "exposure.csv"
    probs.to_csv(out)
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "preset": _cmd_preset,
        "verify-bounds": _cmd_verify_bounds,
        "gate": _cmd_gate,
        "exposure": _cmd_exposure,
    }
    try:
        return handlers[args.command](args)
    except EstimatorUndefinedError as exc:
        print(f"estimator undefined: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
