"""Command-line interface.

Subcommands cover each stage (lsi, smooth-features, train, smooth-labels,
evaluate), the orchestrated runs (pipeline, sparsity-suite), and the bound
validation (check-bounds).  Options can come from a JSON config file; any
flag given on the command line overrides the config value.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import io as ndls_io
from .errors import ConfigError, DataError, NumericalError
from .graph import load_graph
from .lsi import (
    check_bounds,
    compute_lsi_exact,
    compute_lsi_sketch,
    lsi_statistics,
)
from .model import TrainParams, evaluate_accuracy, predict_soft, train_mlp
from .pipeline import (
    PipelineConfig,
    export_reports,
    run_pipeline,
    run_pipeline_data,
    load_pipeline_inputs,
    run_sparsity_suite,
)
from .propagation import build_operator, extreme_eigenvalues
from .smoothing import ndls_smooth, ndls_smooth_labels


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return PipelineConfig.from_json(args.config)
    return PipelineConfig()


def _override_config(config: PipelineConfig, args) -> PipelineConfig:
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "r", None) is not None:
        config.r = args.r
    if getattr(args, "epsilon", None) is not None:
        config.feature_stage.epsilon_grid = [args.epsilon]
        config.label_stage.epsilon_grid = [args.epsilon]
    if getattr(args, "k_max", None) is not None:
        config.feature_stage.k_max = args.k_max
        config.label_stage.k_max = args.k_max
    if getattr(args, "out_dir", None) is not None:
        config.output_dir = args.out_dir
    return config


def _resolve(args, config: PipelineConfig, name: str):
    value = getattr(args, name, None)
    if value is not None:
        return value
    mapping = {
        "edges": config.edges, "features": config.features,
        "labels": config.labels,
        "train": config.splits.get("train"),
        "val": config.splits.get("val"),
        "test": config.splits.get("test"),
    }
    resolved = mapping.get(name)
    if not resolved:
        raise ConfigError(f"--{name.replace('_', '-')} is required "
                          f"(flag or config file)")
    return resolved


def _stage_args(parser, epsilon_default=None, k_max_default=None):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--r", type=float, default=None,
                        help="convolution coefficient in [0, 1]")
    parser.add_argument("--epsilon", type=float, default=epsilon_default,
                        help="distance threshold")
    parser.add_argument("--k-max", type=int, default=k_max_default,
                        help="iteration cap")
    parser.add_argument("--seed", type=int, default=None)


def _operator_for(args, config, r_default=0.5):
    r = args.r if args.r is not None else (config.r if args.config else r_default)
    graph = load_graph(_resolve(args, config, "edges"))
    return graph, build_operator(graph, r)


def _cmd_lsi(args) -> int:
    config = _load_config(args)
    graph, operator = _operator_for(args, config)
    epsilon = args.epsilon if args.epsilon is not None else 0.05
    k_max = args.k_max if args.k_max is not None else 200
    if args.sketch:
        lsi = compute_lsi_sketch(operator, epsilon, k_max=k_max,
                                 probes=args.probes,
                                 seed=args.seed if args.seed is not None else 0)
    else:
        lsi = compute_lsi_exact(operator, epsilon, k_max=k_max)
    ndls_io.save_lsi_csv(args.out_csv, lsi)
    if args.out_npz:
        ndls_io.save_lsi_npz(args.out_npz, lsi)
    if args.stats_json:
        ndls_io.write_json(args.stats_json, lsi_statistics(lsi, graph).to_dict())
    capped = len(lsi.capped_nodes)
    print(f"computed iterations for {graph.n} nodes "
          f"(max {lsi.max_k}, {capped} capped) -> {args.out_csv}")
    return 0


def _cmd_smooth_features(args) -> int:
    config = _load_config(args)
    graph, operator = _operator_for(args, config)
    features = ndls_io.load_matrix(_resolve(args, config, "features"))
    epsilon = args.epsilon if args.epsilon is not None else 0.05
    k_max = args.k_max if args.k_max is not None else 200
    lsi = compute_lsi_exact(operator, epsilon, k_max=k_max)
    smoothed = ndls_smooth(operator, features, lsi)
    ndls_io.save_matrix(args.out, smoothed.values)
    ndls_io.write_json(f"{args.out}.json", smoothed.provenance)
    if args.lsi_csv:
        ndls_io.save_lsi_csv(args.lsi_csv, lsi)
    print(f"smoothed {features.shape[0]}x{features.shape[1]} features -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = _load_config(args)
    features = ndls_io.load_matrix(_resolve(args, config, "features"))
    labels = ndls_io.load_labels(_resolve(args, config, "labels"),
                                 n=features.shape[0])
    splits = ndls_io.load_splits(_resolve(args, config, "train"),
                                 _resolve(args, config, "val"),
                                 _resolve(args, config, "test"))
    params = TrainParams(
        hidden=args.hidden, dropout=args.dropout,
        learning_rate=args.learning_rate, weight_decay=args.weight_decay,
        epochs=args.epochs, patience=args.patience,
        seed=args.seed if args.seed is not None else 0,
    )
    model = train_mlp(features, labels, splits, params)
    ndls_io.save_checkpoint(args.out, model)
    if args.soft_out:
        ndls_io.save_matrix(args.soft_out, predict_soft(model, features))
    print(f"trained model (best val accuracy {model.best_val_accuracy:.4f}, "
          f"epoch {model.epochs_trained}) -> {args.out}")
    return 0


def _cmd_smooth_labels(args) -> int:
    config = _load_config(args)
    graph, operator = _operator_for(args, config)
    soft = ndls_io.load_matrix(args.soft_labels)
    epsilon = args.epsilon if args.epsilon is not None else 0.05
    k_max = args.k_max if args.k_max is not None else 40
    lsi = compute_lsi_exact(operator, epsilon, k_max=k_max)
    smoothed = ndls_smooth_labels(operator, soft, lsi)
    ndls_io.save_matrix(args.out, smoothed.values)
    ndls_io.write_json(f"{args.out}.json", smoothed.provenance)
    print(f"smoothed soft labels for {graph.n} nodes -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    config = _load_config(args)
    soft = ndls_io.load_matrix(args.soft_labels)
    labels = ndls_io.load_labels(_resolve(args, config, "labels"),
                                 n=soft.shape[0])
    mask = ndls_io.load_node_ids(args.mask)
    acc = evaluate_accuracy(soft, labels, mask)
    print(f"accuracy {acc:.6f} on {len(mask)} nodes")
    return 0


def _cmd_pipeline(args) -> int:
    config = _override_config(_load_config(args), args)
    seeds = config.seeds if config.seeds else [config.seed]
    if getattr(args, "seed", None) is not None:
        seeds = [args.seed]
    data = load_pipeline_inputs(config)
    reports = []
    for seed in seeds:
        run_config = dataclasses.replace(config, seed=int(seed))
        report = run_pipeline_data(data, run_config)
        reports.append(report)
        acc = report.accuracy
        print(f"seed {seed}: mlp {acc['mlp']['test']:.4f} | "
              f"ndls_f_mlp {acc['ndls_f_mlp']['test']:.4f} | "
              f"mlp_ndls_l {acc['mlp_ndls_l']['test']:.4f} | "
              f"ndls {acc['ndls']['test']:.4f}")
    if len(reports) > 1:
        for variant in ("mlp", "ndls_f_mlp", "mlp_ndls_l", "ndls"):
            mean = float(np.mean([r.accuracy[variant]["test"] for r in reports]))
            print(f"mean test accuracy {variant}: {mean:.4f}")
    if config.output_dir:
        paths = export_reports(reports, config.output_dir)
        print(f"reports written to {paths['run_report']}")
    else:
        print(reports[-1].to_json())
    return 0


def _cmd_sparsity_suite(args) -> int:
    config = _override_config(_load_config(args), args)
    reports = run_sparsity_suite(config)
    for report in reports:
        exp = report.experiment
        print(f"{exp['axis']}={exp['level']}: "
              f"mlp {report.accuracy['mlp']['test']:.4f} | "
              f"ndls {report.accuracy['ndls']['test']:.4f}")
    if config.output_dir:
        paths = export_reports(reports, config.output_dir)
        print(f"reports written to {paths['sparsity_results']}")
    return 0


def _cmd_check_bounds(args) -> int:
    config = _load_config(args)
    graph = load_graph(_resolve(args, config, "edges"))
    operator = build_operator(graph, 0.0)  # bound theory lives at r=0
    epsilon = args.epsilon if args.epsilon is not None else 0.05
    k_max = args.k_max if args.k_max is not None else 200
    lsi = compute_lsi_exact(operator, epsilon, k_max=k_max)
    lam2, lam_min = extreme_eigenvalues(operator, method=args.method)
    report = check_bounds(lsi, graph, lam2, epsilon, lambda_min=lam_min)
    print(f"lambda2 {lam2:.8f}, lambda_min {lam_min:.8f}, "
          f"rate {report.rate:.8f}, epsilon {epsilon}")
    print(f"max iteration {lsi.max_k}; violations: {len(report.violations)}")
    for violation in report.violations[:20]:
        print(f"  node {violation['node']}: k={violation['k']} exceeds "
              f"{violation['bound']} bound {violation['limit']:.3f}")
    if report.violations:
        raise NumericalError(f"{len(report.violations)} bound violations")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ndls",
        description="Node-dependent local smoothing for graph learning.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lsi", help="compute per-node smoothing iterations")
    _stage_args(p)
    p.add_argument("--edges")
    p.add_argument("--sketch", action="store_true",
                   help="use the Gaussian-sketch estimator")
    p.add_argument("--probes", type=int, default=256)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-npz")
    p.add_argument("--stats-json")
    p.set_defaults(func=_cmd_lsi)

    p = sub.add_parser("smooth-features", help="node-dependent feature smoothing")
    _stage_args(p)
    p.add_argument("--edges")
    p.add_argument("--features")
    p.add_argument("--out", required=True)
    p.add_argument("--lsi-csv")
    p.set_defaults(func=_cmd_smooth_features)

    p = sub.add_parser("train", help="train the base predictor")
    p.add_argument("--config")
    p.add_argument("--features")
    p.add_argument("--labels")
    p.add_argument("--train")
    p.add_argument("--val")
    p.add_argument("--test")
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=50)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--soft-out")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("smooth-labels", help="node-dependent label smoothing")
    _stage_args(p)
    p.add_argument("--edges")
    p.add_argument("--soft-labels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_smooth_labels)

    p = sub.add_parser("evaluate", help="accuracy of soft labels on a mask")
    p.add_argument("--config")
    p.add_argument("--soft-labels", required=True)
    p.add_argument("--labels")
    p.add_argument("--mask", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("pipeline", help="run all three stages plus ablations")
    _stage_args(p)
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("sparsity-suite",
                       help="sweep feature/edge/label sparsity settings")
    _stage_args(p)
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_sparsity_suite)

    p = sub.add_parser("check-bounds",
                       help="validate the iteration upper bounds at r=0")
    _stage_args(p)
    p.add_argument("--edges")
    p.add_argument("--method", default="auto",
                   choices=["auto", "dense", "power"])
    p.set_defaults(func=_cmd_check_bounds)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
