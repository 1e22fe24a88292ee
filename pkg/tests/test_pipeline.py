"""Pipeline orchestration, sparsity helpers, and report export."""

import dataclasses
import json

import numpy as np
import pytest

from ndls.datasets import planted_partition_dataset, write_dataset
from ndls.errors import ConfigError
from ndls.lsi import compute_lsi_exact
from ndls.model import SplitMasks, TrainParams, evaluate_accuracy, predict_soft, train_mlp
from ndls.pipeline import (
    PipelineConfig,
    PredictorConfig,
    StageConfig,
    SparsityConfig,
    export_reports,
    load_pipeline_inputs,
    mask_features,
    model_cell_seed,
    read_degree_vs_lsi_csv,
    read_lsi_cdf_csv,
    read_sparsity_csv,
    run_pipeline,
    run_pipeline_data,
    run_sparsity_suite,
    sparsify_edges,
    subsample_labels,
)
from ndls.propagation import build_operator
from ndls.smoothing import ndls_smooth

from helpers import path_graph, random_connected_graph


@pytest.fixture(scope="module")
def synth_paths(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    ds = planted_partition_dataset(n=150, classes=3, p_in=0.09, p_out=0.005,
                                   noise=2.5, train_per_class=5,
                                   val_per_class=20, seed=11)
    return write_dataset(ds, out)


def small_config(paths, **overrides):
    config = PipelineConfig(
        edges=paths["edges"], features=paths["features"],
        labels=paths["labels"], splits=paths["splits"], r=0.5,
        feature_stage=StageConfig(epsilon_grid=[0.02, 0.08], k_max=60),
        label_stage=StageConfig(epsilon_grid=[0.02, 0.08], k_max=30),
        predictor=PredictorConfig(hidden=16, dropout_grid=[0.2, 0.5],
                                  learning_rate_grid=[0.01], epochs=80,
                                  patience=20),
        seed=5,
    )
    for key, value in overrides.items():
        setattr(config, key, value)
    return config


class TestConfig:
    def test_from_json_roundtrip(self, synth_paths, tmp_path):
        config = small_config(synth_paths)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config.to_dict()))
        loaded = PipelineConfig.from_json(path)
        assert loaded.to_dict() == config.to_dict()

    def test_missing_files_reported(self, synth_paths):
        config = small_config(synth_paths, edges="/nonexistent/edges.txt")
        with pytest.raises(ConfigError, match="missing input files"):
            config.validate()

    def test_empty_grid_rejected(self, synth_paths):
        config = small_config(synth_paths)
        config.feature_stage.epsilon_grid = []
        with pytest.raises(ConfigError, match="epsilon_grid"):
            config.validate()

    def test_bad_r_rejected(self, synth_paths):
        config = small_config(synth_paths, r=1.5)
        with pytest.raises(ConfigError, match="r must be"):
            config.validate()

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            PipelineConfig.from_dict({"edgez": "typo.txt"})

    def test_bad_json_reported(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            PipelineConfig.from_json(path)


@pytest.fixture(scope="module")
def report(synth_paths):
    return run_pipeline(small_config(synth_paths))


class TestRunPipeline:
    def test_reports_all_four_variants(self, report):
        for variant in ("mlp", "ndls_f_mlp", "mlp_ndls_l", "ndls"):
            for split in ("val", "test"):
                assert 0.0 <= report.accuracy[variant][split] <= 1.0

    def test_smoothing_helps_on_planted_partition(self, report):
        assert report.accuracy["ndls"]["test"] > report.accuracy["mlp"]["test"]

    def test_deterministic_up_to_timings(self, synth_paths, report):
        again = run_pipeline(small_config(synth_paths))
        a, b = report.to_dict(), again.to_dict()
        a.pop("timings"), b.pop("timings")
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_forced_zero_iterations_reduce_to_plain_mlp(self, synth_paths):
        """A huge threshold makes every count zero, so smoothing is the
        identity and the full method must equal the plain predictor."""
        config = small_config(synth_paths)
        config.feature_stage = StageConfig(epsilon_grid=[10.0], k_max=60)
        config.label_stage = StageConfig(epsilon_grid=[10.0], k_max=30)
        report = run_pipeline(config)
        assert report.accuracy["ndls"] == report.accuracy["mlp"]
        assert report.accuracy["ndls_f_mlp"] == report.accuracy["mlp"]

    def test_ablation_consistency(self, synth_paths, report):
        """The feature-smoothing entry equals a manual stage-1+2 run with
        the chosen cell."""
        config = small_config(synth_paths)
        data = load_pipeline_inputs(config)
        operator = build_operator(data.graph, config.r)
        chosen = report.chosen
        lsi = compute_lsi_exact(operator, chosen["feature_epsilon"],
                                k_max=config.feature_stage.k_max)
        smoothed = ndls_smooth(operator, data.features, lsi)
        dropout_idx = config.predictor.dropout_grid.index(chosen["dropout"])
        lr_idx = config.predictor.learning_rate_grid.index(
            chosen["learning_rate"])
        seed = model_cell_seed(config.seed, dropout_idx, lr_idx,
                               len(config.predictor.learning_rate_grid))
        params = TrainParams(hidden=chosen["hidden"],
                             dropout=chosen["dropout"],
                             learning_rate=chosen["learning_rate"],
                             weight_decay=config.predictor.weight_decay,
                             epochs=config.predictor.epochs,
                             patience=config.predictor.patience, seed=seed)
        model = train_mlp(smoothed.values, data.labels, data.splits, params)
        soft = predict_soft(model, smoothed.values)
        acc = evaluate_accuracy(soft, data.labels, data.splits.test)
        assert acc == report.accuracy["ndls_f_mlp"]["test"]

    def test_test_labels_do_not_steer_selection(self, synth_paths, tmp_path):
        """Corrupting test labels must not change any chosen value or any
        validation accuracy."""
        config = small_config(synth_paths)
        clean = run_pipeline(config)

        data = load_pipeline_inputs(config)
        labels = data.labels.copy()
        rng = np.random.default_rng(0)
        labels[data.splits.test] = rng.integers(0, labels.max() + 1,
                                                len(data.splits.test))
        corrupted = dataclasses.replace(data, labels=labels)
        dirty = run_pipeline_data(corrupted, config)
        assert dirty.chosen == clean.chosen
        for variant in clean.accuracy:
            assert dirty.accuracy[variant]["val"] == \
                clean.accuracy[variant]["val"]

    def test_lsi_stats_attached(self, report):
        for stage in ("feature", "label"):
            stats = report.lsi_stats[stage]
            assert stats["cdf"][-1][1] == pytest.approx(1.0)

    def test_sketch_branch_beyond_exact_limit(self, synth_paths, monkeypatch):
        """Above the exact-estimator node limit the stages fall back to
        the sketch estimator; force the limit down to exercise it."""
        import ndls.pipeline as pipeline_mod

        monkeypatch.setattr(pipeline_mod, "EXACT_NODE_LIMIT", 10)
        config = small_config(synth_paths)
        report = run_pipeline(config)
        for stage in ("feature", "label"):
            assert report.lsi_stats[stage]["method"] == "sketch"
        for variant in ("mlp", "ndls"):
            assert 0.0 <= report.accuracy[variant]["test"] <= 1.0


class TestSparsifyEdges:
    def test_zero_fraction_identity(self):
        g = random_connected_graph(0, max_n=60)
        g2 = sparsify_edges(g, 0.0, seed=1)
        assert (g.adjacency != g2.adjacency).nnz == 0

    def test_removes_floor_fraction(self):
        g = path_graph(11)  # 10 undirected edges
        g2 = sparsify_edges(g, 0.5, seed=0)
        assert g2.m == 5
        assert g2.n == g.n

    def test_deterministic(self):
        g = random_connected_graph(1, max_n=80)
        a = sparsify_edges(g, 0.3, seed=9)
        b = sparsify_edges(g, 0.3, seed=9)
        assert (a.adjacency != b.adjacency).nnz == 0

    def test_self_loops_and_symmetry_kept(self):
        g = random_connected_graph(2, max_n=80)
        g2 = sparsify_edges(g, 0.4, seed=2)
        assert (g2.adjacency.diagonal() == 1.0).all()
        assert (g2.adjacency != g2.adjacency.T).nnz == 0

    def test_domain(self):
        g = path_graph(3)
        for bad in (-0.1, 1.0):
            with pytest.raises(ConfigError):
                sparsify_edges(g, bad)


class TestMaskFeatures:
    def _setup(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((20, 3))
        splits = SplitMasks(train=np.arange(5), val=np.arange(5, 10),
                            test=np.arange(10, 20))
        return x, splits

    def test_zero_fraction_identity(self):
        x, splits = self._setup()
        np.testing.assert_array_equal(mask_features(x, splits, 0.0), x)

    def test_full_fraction_zeroes_all_non_train(self):
        x, splits = self._setup()
        out = mask_features(x, splits, 1.0, seed=1)
        np.testing.assert_array_equal(out[5:], 0.0)
        np.testing.assert_array_equal(out[:5], x[:5])

    def test_train_rows_never_masked(self):
        x, splits = self._setup()
        out = mask_features(x, splits, 0.7, seed=3)
        np.testing.assert_array_equal(out[splits.train], x[splits.train])

    def test_masked_node_recovers_after_smoothing(self):
        """A zeroed node with nonzero in-ball neighbors gets nonzero
        smoothed features whenever its count is at least one."""
        g = path_graph(4)
        op = build_operator(g, 0.5)
        x = np.ones((4, 2))
        splits = SplitMasks(train=np.array([0]), val=np.array([1]),
                            test=np.array([2, 3]))
        masked = mask_features(x, splits, 1.0, seed=0)
        lsi = compute_lsi_exact(op, 0.05, k_max=50)
        assert (lsi.values >= 1).all()
        out = ndls_smooth(op, masked, lsi)
        assert (np.abs(out.values).sum(axis=1) > 0).all()


class TestSubsampleLabels:
    def _splits(self, labels):
        n = len(labels)
        return SplitMasks(train=np.arange(n - 10), val=np.arange(n - 10, n - 5),
                          test=np.arange(n - 5, n))

    def test_full_count_returns_original_mask(self):
        labels = np.repeat([0, 1], 15)
        splits = self._splits(labels)
        per_class = min(np.bincount(labels[splits.train]))
        out = subsample_labels(splits, labels, per_class, seed=0)
        counts = np.bincount(labels[out.train])
        assert (counts == per_class).all()

    def test_one_per_class(self):
        labels = np.tile([0, 1, 2], 10)
        splits = self._splits(labels)
        out = subsample_labels(splits, labels, 1, seed=0)
        assert len(out.train) == 3
        np.testing.assert_array_equal(out.val, splits.val)
        np.testing.assert_array_equal(out.test, splits.test)

    def test_deterministic(self):
        labels = np.tile([0, 1, 2], 10)
        splits = self._splits(labels)
        a = subsample_labels(splits, labels, 2, seed=4)
        b = subsample_labels(splits, labels, 2, seed=4)
        np.testing.assert_array_equal(a.train, b.train)

    def test_insufficient_candidates_names_class(self):
        labels = np.array([0] * 20 + [1] * 2 + [2] * 8)
        splits = SplitMasks(train=np.arange(30), val=np.empty(0, dtype=int),
                            test=np.empty(0, dtype=int))
        with pytest.raises(ConfigError, match="class 1"):
            subsample_labels(splits, labels, 5, seed=0)


class TestSparsitySuite:
    def test_empty_grids_warn(self, synth_paths):
        config = small_config(synth_paths)
        with pytest.warns(UserWarning, match="empty"):
            reports = run_sparsity_suite(config)
        assert reports == []

    def test_edge_zero_reproduces_base(self, synth_paths):
        config = small_config(synth_paths,
                              sparsity=SparsityConfig(edge_fractions=[0.0]))
        base = run_pipeline(config)
        suite = run_sparsity_suite(config)
        assert len(suite) == 1
        assert suite[0].accuracy == base.accuracy
        assert suite[0].experiment == {"axis": "edge", "level": 0.0}

    def test_label_sweep_monotone_mask_sizes(self, synth_paths):
        config = small_config(synth_paths)
        data = load_pipeline_inputs(config)
        sizes = [len(subsample_labels(data.splits, data.labels, k,
                                      seed=0).train)
                 for k in range(1, 5)]
        assert sizes == sorted(sizes)


class TestExportReports:
    def test_files_and_roundtrip(self, synth_paths, tmp_path):
        config = small_config(
            synth_paths, sparsity=SparsityConfig(label_per_class=[2, 4]))
        reports = run_sparsity_suite(config)
        paths = export_reports(reports, tmp_path / "out")

        with open(paths["run_report"], encoding="utf-8") as handle:
            raw = json.load(handle)
        assert len(raw) == 2
        assert raw[0]["schema_version"] == 1

        cdf = read_lsi_cdf_csv(paths["lsi_cdf"])
        fractions = [row[1] for row in cdf]
        assert fractions == sorted(fractions)
        assert fractions[-1] == pytest.approx(1.0)
        assert cdf == reports[0].lsi_stats["feature"]["cdf"]

        buckets = read_degree_vs_lsi_csv(paths["degree_vs_lsi"])
        expected = [[float(d), float(m), float(c)] for d, m, c in
                    reports[0].lsi_stats["feature"]["degree_buckets"]]
        np.testing.assert_allclose(buckets, expected, atol=1e-9)

        rows = read_sparsity_csv(paths["sparsity_results"])
        assert [row["axis"] for row in rows] == ["label", "label"]
        assert rows[0]["ndls_test"] == pytest.approx(
            reports[0].accuracy["ndls"]["test"])

    def test_empty_reports_write_headers_only(self, tmp_path):
        paths = export_reports([], tmp_path / "out")
        assert read_lsi_cdf_csv(paths["lsi_cdf"]) == []
        assert read_degree_vs_lsi_csv(paths["degree_vs_lsi"]) == []
        assert read_sparsity_csv(paths["sparsity_results"]) == []
        with open(paths["run_report"], encoding="utf-8") as handle:
            assert json.load(handle) == []
