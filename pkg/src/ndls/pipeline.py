"""Three-stage pipeline: smooth features, fit a predictor, smooth labels.

One run trains the full method alongside its three ablations (plain
predictor, feature smoothing only, label smoothing only) on the same seed.
Thresholds and predictor knobs are selected on validation accuracy; test
labels are touched exactly once per variant, by the final evaluation.
The graph is consumed only by the smoothing stages, never by the
predictor.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io as ndls_io
from .errors import ConfigError, DataError
from .graph import Graph, build_graph, load_graph
from .lsi import (
    EXACT_NODE_LIMIT,
    LsiVector,
    compute_lsi_grid,
    compute_lsi_sketch,
    lsi_statistics,
)
from .model import (
    GridCell,
    HyperGrid,
    MlpModel,
    SplitMasks,
    TrainParams,
    evaluate_accuracy,
    grid_search,
    predict_soft,
    train_mlp,
)
from .propagation import build_operator
from .smoothing import ndls_smooth, ndls_smooth_labels

SCHEMA_VERSION = 1


@dataclass
class StageConfig:
    epsilon_grid: list = field(default_factory=lambda: [0.01, 0.03, 0.05])
    k_max: int = 200


@dataclass
class PredictorConfig:
    hidden: int | None = None   # None: 64 below 50k nodes, 256 above
    dropout_grid: list = field(default_factory=lambda: [0.2, 0.4, 0.6, 0.8])
    learning_rate_grid: list = field(default_factory=lambda: [0.1, 0.01, 0.001])
    weight_decay: float = 5e-4
    epochs: int = 1000
    patience: int = 50


@dataclass
class SparsityConfig:
    feature_fractions: list = field(default_factory=list)
    edge_fractions: list = field(default_factory=list)
    label_per_class: list = field(default_factory=list)


@dataclass
class PipelineConfig:
    edges: str = ""
    features: str = ""
    labels: str = ""
    splits: dict = field(default_factory=dict)  # {"train":…, "val":…, "test":…}
    r: float = 0.5
    feature_stage: StageConfig = field(default_factory=StageConfig)
    label_stage: StageConfig = field(
        default_factory=lambda: StageConfig(k_max=40))
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    seed: int = 0
    seeds: list = field(default_factory=list)
    sparsity: SparsityConfig = field(default_factory=SparsityConfig)
    output_dir: str | None = None
    sketch_probes: int = 256

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        cfg = cls()
        known = {"edges", "features", "labels", "splits", "r", "seed", "seeds",
                 "output_dir", "sketch_probes", "feature_stage", "label_stage",
                 "predictor", "sparsity", "schema_version"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("edges", "features", "labels", "splits", "r", "seed",
                    "seeds", "output_dir", "sketch_probes"):
            if key in raw:
                setattr(cfg, key, raw[key])
        if "feature_stage" in raw:
            cfg.feature_stage = StageConfig(**raw["feature_stage"])
        if "label_stage" in raw:
            cfg.label_stage = StageConfig(**raw["label_stage"])
        if "predictor" in raw:
            cfg.predictor = PredictorConfig(**raw["predictor"])
        if "sparsity" in raw:
            cfg.sparsity = SparsityConfig(**raw["sparsity"])
        return cfg

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as handle:
                raw = json.load(handle)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "edges": self.edges, "features": self.features,
            "labels": self.labels, "splits": dict(self.splits), "r": self.r,
            "feature_stage": vars(self.feature_stage).copy(),
            "label_stage": vars(self.label_stage).copy(),
            "predictor": vars(self.predictor).copy(),
            "seed": self.seed, "seeds": list(self.seeds),
            "sparsity": vars(self.sparsity).copy(),
            "output_dir": self.output_dir,
            "sketch_probes": self.sketch_probes,
        }

    def validate(self) -> None:
        if not 0.0 <= self.r <= 1.0:
            raise ConfigError(f"r must be in [0, 1], got {self.r}")
        for name, stage in (("feature_stage", self.feature_stage),
                            ("label_stage", self.label_stage)):
            if not stage.epsilon_grid:
                raise ConfigError(f"{name}.epsilon_grid is empty")
            if stage.k_max <= 0:
                raise ConfigError(f"{name}.k_max must be positive")
        if not self.predictor.dropout_grid or not self.predictor.learning_rate_grid:
            raise ConfigError("predictor grids must be non-empty")
        missing = []
        for label, path in [("edges", self.edges), ("features", self.features),
                            ("labels", self.labels)] + [
                ("splits." + k, self.splits.get(k, "")) for k in
                ("train", "val", "test")]:
            if not path or not Path(path).exists():
                missing.append(f"{label}: {path!r}")
        if missing:
            raise ConfigError("missing input files: " + "; ".join(missing))


@dataclass
class PipelineData:
    """Loaded inputs; corruption experiments replace fields on copies."""

    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    splits: SplitMasks


def load_pipeline_inputs(config: PipelineConfig) -> PipelineData:
    config.validate()
    graph = load_graph(config.edges)
    features = ndls_io.load_matrix(config.features)
    labels = ndls_io.load_labels(config.labels, n=graph.n)
    splits = ndls_io.load_splits(config.splits["train"], config.splits["val"],
                                 config.splits["test"])
    if features.shape[0] != graph.n:
        raise DataError(
            f"feature matrix has {features.shape[0]} rows for {graph.n} nodes")
    splits.validate(graph.n)
    return PipelineData(graph=graph, features=features, labels=labels,
                        splits=splits)


def model_cell_seed(base_seed: int, dropout_index: int, lr_index: int,
                    num_learning_rates: int) -> int:
    """Per-cell training seed.

    Derived from the model knobs only, so grid cells that differ just in
    the smoothing threshold train identical models on identical inputs;
    forcing zero smoothing then reproduces the plain predictor exactly.
    """
    return base_seed + dropout_index * num_learning_rates + lr_index


@dataclass
class RunReport:
    """All numbers produced by one pipeline run."""

    seed: int
    r: float
    chosen: dict
    accuracy: dict
    lsi_stats: dict
    timings: dict
    experiment: dict | None = None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "r": self.r,
            "chosen": self.chosen,
            "accuracy": self.accuracy,
            "lsi_stats": self.lsi_stats,
            "timings": self.timings,
            "experiment": self.experiment,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _stage_lsi_grid(operator, stage: StageConfig, seed: int,
                    probes: int) -> dict[float, LsiVector]:
    if operator.graph.n <= EXACT_NODE_LIMIT:
        return compute_lsi_grid(operator, stage.epsilon_grid, k_max=stage.k_max)
    return {
        float(eps): compute_lsi_sketch(operator, eps, k_max=stage.k_max,
                                       probes=probes, seed=seed)
        for eps in stage.epsilon_grid
    }


def _select_label_epsilon(operator, lsis: dict[float, LsiVector],
                          soft: np.ndarray, labels: np.ndarray,
                          splits: SplitMasks):
    """Best label-stage threshold by validation accuracy; ties take the
    smaller threshold."""
    best = None
    for eps in sorted(lsis):
        smoothed = ndls_smooth_labels(operator, soft, lsis[eps])
        acc = evaluate_accuracy(smoothed.values, labels, splits.val)
        if best is None or acc > best[1]:
            best = (eps, acc, smoothed)
    return best


def run_pipeline_data(data: PipelineData, config: PipelineConfig,
                      experiment: dict | None = None) -> RunReport:
    """Run all stages and ablations on already-loaded inputs."""
    t_start = time.perf_counter()
    timings: dict[str, float] = {}
    graph, features, labels, splits = (data.graph, data.features, data.labels,
                                       data.splits)
    splits.validate(graph.n)
    operator = build_operator(graph, config.r)
    hidden = config.predictor.hidden
    if hidden is None:
        hidden = 64 if graph.n < 50_000 else 256

    t0 = time.perf_counter()
    feature_lsis = _stage_lsi_grid(operator, config.feature_stage, config.seed,
                                   config.sketch_probes)
    timings["feature_lsi"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    smoothed = {eps: ndls_smooth(operator, features, lsi)
                for eps, lsi in feature_lsis.items()}
    timings["feature_smoothing"] = time.perf_counter() - t0

    lr_grid = [float(v) for v in config.predictor.learning_rate_grid]
    dropout_grid = [float(v) for v in config.predictor.dropout_grid]

    def make_train_fn(matrix_for):
        def train_fn(cell: GridCell) -> MlpModel:
            seed = model_cell_seed(config.seed,
                                   dropout_grid.index(cell.dropout),
                                   lr_grid.index(cell.learning_rate),
                                   len(lr_grid))
            params = TrainParams(
                hidden=hidden, dropout=cell.dropout,
                learning_rate=cell.learning_rate,
                weight_decay=config.predictor.weight_decay,
                epochs=config.predictor.epochs,
                patience=config.predictor.patience, seed=seed,
            )
            return train_mlp(matrix_for(cell), labels, splits, params)
        return train_fn

    def eval_fn(cell: GridCell, model: MlpModel) -> float:
        return model.best_val_accuracy

    t0 = time.perf_counter()
    plain_grid = HyperGrid(epsilons=(0.0,), dropouts=tuple(dropout_grid),
                           learning_rates=tuple(lr_grid))
    plain = grid_search(plain_grid, make_train_fn(lambda cell: features), eval_fn)

    feature_eps = tuple(sorted(feature_lsis))
    f_grid = HyperGrid(epsilons=feature_eps, dropouts=tuple(dropout_grid),
                       learning_rates=tuple(lr_grid))
    ndls_f = grid_search(
        f_grid, make_train_fn(lambda cell: smoothed[cell.epsilon].values),
        eval_fn)
    timings["training"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    label_lsis = _stage_lsi_grid(operator, config.label_stage, config.seed,
                                 config.sketch_probes)
    timings["label_lsi"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    soft_plain = predict_soft(plain.best_artifact, features)
    soft_f = predict_soft(ndls_f.best_artifact,
                          smoothed[ndls_f.best.epsilon].values)
    eps_l_plain, val_l_plain, smoothed_l_plain = _select_label_epsilon(
        operator, label_lsis, soft_plain, labels, splits)
    eps_l_full, val_l_full, smoothed_l_full = _select_label_epsilon(
        operator, label_lsis, soft_f, labels, splits)
    timings["label_smoothing"] = time.perf_counter() - t0

    accuracy = {
        "mlp": {
            "val": plain.best_artifact.best_val_accuracy,
            "test": evaluate_accuracy(soft_plain, labels, splits.test),
        },
        "ndls_f_mlp": {
            "val": ndls_f.best_artifact.best_val_accuracy,
            "test": evaluate_accuracy(soft_f, labels, splits.test),
        },
        "mlp_ndls_l": {
            "val": val_l_plain,
            "test": evaluate_accuracy(smoothed_l_plain.values, labels,
                                      splits.test),
        },
        "ndls": {
            "val": val_l_full,
            "test": evaluate_accuracy(smoothed_l_full.values, labels,
                                      splits.test),
        },
    }

    chosen = {
        "hidden": hidden,
        "feature_epsilon": ndls_f.best.epsilon,
        "dropout": ndls_f.best.dropout,
        "learning_rate": ndls_f.best.learning_rate,
        "label_epsilon": eps_l_full,
        "label_epsilon_plain": eps_l_plain,
        "mlp_dropout": plain.best.dropout,
        "mlp_learning_rate": plain.best.learning_rate,
    }

    lsi_stats = {
        "feature": lsi_statistics(feature_lsis[ndls_f.best.epsilon],
                                  graph).to_dict(),
        "label": lsi_statistics(label_lsis[eps_l_full], graph).to_dict(),
    }

    timings["total"] = time.perf_counter() - t_start
    return RunReport(seed=config.seed, r=config.r, chosen=chosen,
                     accuracy=accuracy, lsi_stats=lsi_stats, timings=timings,
                     experiment=experiment)


def run_pipeline(config: PipelineConfig) -> RunReport:
    """Load inputs per the config and run the full pipeline once."""
    data = load_pipeline_inputs(config)
    return run_pipeline_data(data, config)


# ---------------------------------------------------------------------------
# sparsity experiments
# ---------------------------------------------------------------------------


def sparsify_edges(graph: Graph, fraction: float, seed: int = 0) -> Graph:
    """Remove floor(fraction * m) undirected edges uniformly at random.

    Both directions of an edge go together and self-loops are never
    touched; deterministic per seed.
    """
    fraction = float(fraction)
    if not 0.0 <= fraction < 1.0:
        raise ConfigError(f"edge fraction must be in [0, 1), got {fraction}")
    edges = graph.undirected_edges()
    remove = int(fraction * len(edges))
    if remove == 0:
        return graph
    rng = np.random.default_rng(seed)
    keep = rng.permutation(len(edges))[remove:]
    return build_graph(edges[np.sort(keep)], node_count=graph.n)


def mask_features(features: np.ndarray, splits: SplitMasks, fraction: float,
                  seed: int = 0) -> np.ndarray:
    """Zero the rows of a random fraction of non-training nodes."""
    fraction = float(fraction)
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError(f"feature fraction must be in [0, 1], got {fraction}")
    x = np.asarray(features).copy()
    non_train = np.setdiff1d(np.arange(x.shape[0]), splits.train)
    count = int(fraction * len(non_train))
    if count:
        rng = np.random.default_rng(seed)
        chosen = rng.permutation(non_train)[:count]
        x[chosen] = 0.0
    return x


def subsample_labels(splits: SplitMasks, labels: np.ndarray, per_class: int,
                     seed: int = 0) -> SplitMasks:
    """Shrink the train mask to exactly ``per_class`` nodes per class."""
    per_class = int(per_class)
    if per_class < 1:
        raise ConfigError(f"per_class must be >= 1, got {per_class}")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    new_train = []
    for c in np.unique(labels[splits.train]):
        pool = splits.train[labels[splits.train] == c]
        if len(pool) < per_class:
            raise ConfigError(
                f"class {int(c)} has only {len(pool)} training candidates, "
                f"need {per_class}")
        new_train.append(np.sort(rng.permutation(pool)[:per_class]))
    return SplitMasks(train=np.sort(np.concatenate(new_train)),
                      val=splits.val, test=splits.test)


def run_sparsity_suite(config: PipelineConfig) -> list[RunReport]:
    """Sweep the three sparsity axes independently."""
    sparsity = config.sparsity
    if not (sparsity.feature_fractions or sparsity.edge_fractions
            or sparsity.label_per_class):
        warnings.warn("sparsity grids are empty; nothing to run", stacklevel=2)
        return []
    base = load_pipeline_inputs(config)
    reports = []
    for fraction in sparsity.feature_fractions:
        data = replace(base, features=mask_features(
            base.features, base.splits, fraction, seed=config.seed))
        reports.append(run_pipeline_data(
            data, config, experiment={"axis": "feature", "level": float(fraction)}))
    for fraction in sparsity.edge_fractions:
        data = replace(base, graph=sparsify_edges(
            base.graph, fraction, seed=config.seed))
        reports.append(run_pipeline_data(
            data, config, experiment={"axis": "edge", "level": float(fraction)}))
    for per_class in sparsity.label_per_class:
        data = replace(base, splits=subsample_labels(
            base.splits, base.labels, per_class, seed=config.seed))
        reports.append(run_pipeline_data(
            data, config, experiment={"axis": "label", "level": int(per_class)}))
    return reports


# ---------------------------------------------------------------------------
# report export
# ---------------------------------------------------------------------------

_SPARSITY_COLUMNS = [
    "axis", "level", "seed", "mlp_val", "mlp_test", "ndls_f_mlp_val",
    "ndls_f_mlp_test", "mlp_ndls_l_val", "mlp_ndls_l_test", "ndls_val",
    "ndls_test",
]


def export_reports(reports: list[RunReport], out_dir: str | Path) -> dict:
    """Write run_report.json plus the plotting CSVs; returns the file map."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "run_report": out / "run_report.json",
            "lsi_cdf": out / "lsi_cdf.csv",
            "degree_vs_lsi": out / "degree_vs_lsi.csv",
            "sparsity_results": out / "sparsity_results.csv",
        }
        with open(paths["run_report"], "w", encoding="utf-8") as handle:
            json.dump([r.to_dict() for r in reports], handle, sort_keys=True,
                      indent=2)
            handle.write("\n")

        # repr() is the shortest exact float64 form, so the CSVs round-trip
        stats = reports[0].lsi_stats.get("feature", {}) if reports else {}
        with open(paths["lsi_cdf"], "w", encoding="utf-8") as handle:
            handle.write("k,cdf\n")
            for k, frac in stats.get("cdf", []):
                handle.write(f"{int(k)},{float(frac)!r}\n")
        with open(paths["degree_vs_lsi"], "w", encoding="utf-8") as handle:
            handle.write("degree,mean_k,count\n")
            for degree, mean_k, count in stats.get("degree_buckets", []):
                handle.write(f"{int(degree)},{float(mean_k)!r},{int(count)}\n")

        with open(paths["sparsity_results"], "w", encoding="utf-8") as handle:
            handle.write(",".join(_SPARSITY_COLUMNS) + "\n")
            for report in reports:
                if not report.experiment:
                    continue
                row = [str(report.experiment["axis"]),
                       repr(float(report.experiment["level"])),
                       str(report.seed)]
                for variant in ("mlp", "ndls_f_mlp", "mlp_ndls_l", "ndls"):
                    row.append(repr(float(report.accuracy[variant]["val"])))
                    row.append(repr(float(report.accuracy[variant]["test"])))
                handle.write(",".join(row) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write reports under {out}: {exc}") from exc
    return {k: str(v) for k, v in paths.items()}


def read_lsi_cdf_csv(path: str | Path) -> list[list[float]]:
    return _read_csv_rows(path, expect_header="k,cdf")


def read_degree_vs_lsi_csv(path: str | Path) -> list[list[float]]:
    return _read_csv_rows(path, expect_header="degree,mean_k,count")


def read_sparsity_csv(path: str | Path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().strip().split(",")
        if header != _SPARSITY_COLUMNS:
            raise DataError(f"{path}: unexpected header {header}")
        rows = []
        for line in handle:
            parts = line.strip().split(",")
            row = {"axis": parts[0]}
            for key, value in zip(_SPARSITY_COLUMNS[1:], parts[1:]):
                row[key] = float(value)
            rows.append(row)
    return rows


def _read_csv_rows(path: str | Path, expect_header: str) -> list[list[float]]:
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().strip()
        if header != expect_header:
            raise DataError(f"{path}: unexpected header {header!r}")
        return [[float(tok) for tok in line.strip().split(",")]
                for line in handle if line.strip()]
