"""Predictor training, inference, grid search, and gradient validation."""

import numpy as np
import pytest

import ndls.model as model_mod
from ndls.errors import ConfigError, DataError, NumericalError
from ndls.model import (
    GridCell,
    HyperGrid,
    SplitMasks,
    TrainParams,
    _softmax,
    evaluate_accuracy,
    gradient_check,
    grid_search,
    predict_soft,
    train_mlp,
)


def blob_data(n_per=50, dim=4, gap=4.0, seed=0):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(-gap / 2, 0.3, (n_per, dim)),
                   rng.normal(gap / 2, 0.3, (n_per, dim))])
    y = np.repeat([0, 1], n_per)
    n = 2 * n_per
    ids = np.arange(n)
    splits = SplitMasks(train=ids[::2], val=ids[1::4], test=ids[3::4])
    return x, y, splits


class TestTrainMlp:
    def test_separable_blobs_reach_perfect_train_accuracy(self):
        x, y, splits = blob_data()
        params = TrainParams(hidden=16, dropout=0.0, learning_rate=0.01,
                             weight_decay=0.0, epochs=200, seed=1)
        model = train_mlp(x, y, splits, params)
        soft = predict_soft(model, x)
        assert evaluate_accuracy(soft, y, splits.train) == 1.0

    def test_zero_epochs_returns_uniform_predictor(self):
        x, y, splits = blob_data()
        model = train_mlp(x, y, splits, TrainParams(hidden=16, epochs=0))
        np.testing.assert_allclose(predict_soft(model, x), 0.5, atol=1e-12)
        assert model.epochs_trained == 0

    def test_deterministic_given_seed(self):
        x, y, splits = blob_data()
        params = TrainParams(hidden=8, dropout=0.4, learning_rate=0.01,
                             epochs=60, seed=7)
        a = train_mlp(x, y, splits, params)
        b = train_mlp(x, y, splits, params)
        for key in a.weights:
            np.testing.assert_array_equal(a.weights[key], b.weights[key])

    def test_train_order_irrelevant(self):
        x, y, splits = blob_data()
        params = TrainParams(hidden=8, dropout=0.4, learning_rate=0.01,
                             epochs=40, seed=3)
        rng = np.random.default_rng(0)
        shuffled = SplitMasks(train=rng.permutation(splits.train),
                              val=splits.val, test=splits.test)
        a = train_mlp(x, y, splits, params)
        b = train_mlp(x, y, shuffled, params)
        for key in a.weights:
            np.testing.assert_array_equal(a.weights[key], b.weights[key])

    def test_empty_train_set(self):
        x, y, splits = blob_data()
        empty = SplitMasks(train=np.empty(0, dtype=np.int64),
                           val=splits.val, test=splits.test)
        with pytest.raises(ConfigError, match="empty"):
            train_mlp(x, y, empty, TrainParams())

    def test_unlabeled_train_node_rejected(self):
        x, y, splits = blob_data()
        y = y.copy()
        y[splits.train[0]] = -1
        with pytest.raises(DataError, match="unlabeled"):
            train_mlp(x, y, splits, TrainParams())

    def test_overlapping_masks_rejected(self):
        x, y, splits = blob_data()
        bad = SplitMasks(train=splits.train, val=splits.train[:3],
                         test=splits.test)
        with pytest.raises(DataError, match="disjoint"):
            train_mlp(x, y, bad, TrainParams())

    def test_divergence_raises_with_epoch(self):
        x, y, splits = blob_data()
        params = TrainParams(hidden=8, dropout=0.0, learning_rate=1e12,
                             optimizer="gd", epochs=50, seed=0)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NumericalError) as info:
                train_mlp(x, y, splits, params)
        assert info.value.epoch is not None

    def test_early_stopping_returns_best_epoch(self):
        x, y, splits = blob_data(gap=1.0, seed=5)
        params = TrainParams(hidden=8, dropout=0.2, learning_rate=0.05,
                             epochs=120, patience=15, seed=2)
        model = train_mlp(x, y, splits, params)
        soft = predict_soft(model, x)
        assert evaluate_accuracy(soft, y, splits.val) == pytest.approx(
            model.best_val_accuracy)

    def test_linear_mode_gd_loss_non_increasing(self):
        """Linear softmax with plain gradient descent is convex, so a
        small enough step never increases the loss."""
        x, y, splits = blob_data(gap=1.2, seed=4)
        params = TrainParams(hidden=None, dropout=0.0, learning_rate=0.01,
                             weight_decay=1e-3, optimizer="gd", epochs=200,
                             patience=10_000, seed=0)
        model = train_mlp(x, y, splits, params)
        diffs = np.diff(model.loss_history)
        assert (diffs <= 1e-12).all()

    def test_weights_frozen_after_training(self):
        x, y, splits = blob_data()
        model = train_mlp(x, y, splits, TrainParams(hidden=8, epochs=5))
        with pytest.raises(ValueError):
            model.weights["W1"][0, 0] = 0.0


class TestPredictSoft:
    def test_zero_output_layer_uniform(self):
        x, y, splits = blob_data()
        model = train_mlp(x, y, splits, TrainParams(hidden=16, epochs=0))
        soft = predict_soft(model, x)
        np.testing.assert_allclose(soft, 0.5, atol=1e-12)
        np.testing.assert_allclose(soft.sum(axis=1), 1.0, atol=1e-6)

    def test_single_class_training(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((40, 3))
        y = np.ones(40, dtype=np.int64)  # class 0 exists but is never seen
        splits = SplitMasks(train=np.arange(5), val=np.arange(5, 10),
                            test=np.arange(10, 20))
        model = train_mlp(x, y, splits,
                          TrainParams(hidden=8, dropout=0.0, epochs=100,
                                      learning_rate=0.05, seed=0))
        soft = predict_soft(model, x)
        assert (soft[:5].argmax(axis=1) == 1).all()

    def test_softmax_shift_invariance(self):
        rng = np.random.default_rng(1)
        logits = rng.standard_normal((30, 5))
        np.testing.assert_allclose(_softmax(logits), _softmax(logits + 123.0),
                                   atol=1e-12)

    def test_width_mismatch(self):
        x, y, splits = blob_data()
        model = train_mlp(x, y, splits, TrainParams(hidden=8, epochs=1))
        with pytest.raises(DataError, match="width"):
            predict_soft(model, np.ones((10, 7)))

    def test_rowwise_independence(self):
        x, y, splits = blob_data()
        model = train_mlp(x, y, splits, TrainParams(hidden=8, epochs=20))
        full = predict_soft(model, x)
        altered = x.copy()
        altered[1:] = 0.0
        np.testing.assert_array_equal(predict_soft(model, altered)[0], full[0])


class TestEvaluateAccuracy:
    def test_perfect(self):
        soft = np.eye(3)[[0, 1, 2, 0]]
        labels = np.array([0, 1, 2, 0])
        assert evaluate_accuracy(soft, labels, np.arange(4)) == 1.0

    def test_uniformly_wrong(self):
        soft = np.eye(3)[[1, 2, 0]]
        labels = np.array([0, 1, 2])
        assert evaluate_accuracy(soft, labels, np.arange(3)) == 0.0

    def test_half_right(self):
        soft = np.eye(2)[[0] * 10]
        labels = np.array([0] * 5 + [1] * 5)
        assert evaluate_accuracy(soft, labels, np.arange(10)) == 0.5

    def test_empty_mask(self):
        with pytest.raises(ConfigError, match="empty"):
            evaluate_accuracy(np.eye(2), np.array([0, 1]),
                              np.empty(0, dtype=np.int64))

    def test_tie_breaks_to_lowest_class(self):
        soft = np.array([[0.5, 0.5]])
        assert evaluate_accuracy(soft, np.array([0]), np.array([0])) == 1.0
        assert evaluate_accuracy(soft, np.array([1]), np.array([0])) == 0.0


class TestGridSearch:
    def test_single_cell(self):
        grid = HyperGrid(epsilons=(0.03,), dropouts=(0.5,),
                         learning_rates=(0.01,))
        result = grid_search(grid, lambda cell: "artifact",
                             lambda cell, art: 0.9)
        assert result.best == GridCell(0.03, 0.5, 0.01)
        assert result.best_artifact == "artifact"
        assert len(result.table) == 1

    def test_negative_epsilon_score_prefers_smallest(self):
        grid = HyperGrid(epsilons=(0.01, 0.03, 0.05), dropouts=(0.5,),
                         learning_rates=(0.01,))
        result = grid_search(grid, lambda cell: None,
                             lambda cell, art: -cell.epsilon)
        assert result.best.epsilon == 0.01

    def test_tie_break_order(self):
        grid = HyperGrid(epsilons=(0.05, 0.01), dropouts=(0.8, 0.2),
                         learning_rates=(0.1, 0.001))
        result = grid_search(grid, lambda cell: None, lambda cell, art: 0.5)
        assert result.best == GridCell(0.01, 0.2, 0.001)

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigError, match="empty"):
            grid_search(HyperGrid(epsilons=()), lambda c: None,
                        lambda c, a: 0.0)

    def test_table_covers_all_cells(self):
        grid = HyperGrid(epsilons=(0.01, 0.03), dropouts=(0.2, 0.4),
                         learning_rates=(0.1,))
        result = grid_search(grid, lambda cell: None,
                             lambda cell, art: cell.dropout)
        assert len(result.table) == 4
        assert result.best.dropout == 0.4


class TestGradientCheck:
    def test_analytic_matches_finite_differences(self):
        x, y, splits = blob_data(n_per=15)
        model = train_mlp(x, y, splits,
                          TrainParams(hidden=10, dropout=0.0, epochs=15,
                                      weight_decay=1e-3, seed=0))
        assert gradient_check(model, x[:20], y[:20], sample_params=8) < 1e-4

    def test_linear_mode_checks_out(self):
        x, y, splits = blob_data(n_per=15)
        model = train_mlp(x, y, splits,
                          TrainParams(hidden=None, dropout=0.0, epochs=10,
                                      seed=0))
        assert gradient_check(model, x[:20], y[:20], sample_params=8) < 1e-4

    def test_sign_flip_detected(self, monkeypatch):
        """Negative control: corrupting the output-layer gradient must
        blow the relative error far past the pass threshold."""
        x, y, splits = blob_data(n_per=15)
        model = train_mlp(x, y, splits,
                          TrainParams(hidden=10, dropout=0.0, epochs=15,
                                      seed=0))
        original = model_mod._loss_and_grads

        def corrupted(*args, **kwargs):
            loss, grads = original(*args, **kwargs)
            if "W2" in grads:
                grads["W2"] = -grads["W2"]
            return loss, grads

        monkeypatch.setattr(model_mod, "_loss_and_grads", corrupted)
        assert gradient_check(model, x[:20], y[:20], sample_params=8) > 1e-2

    def test_zero_features_give_zero_hidden_gradient(self):
        """With zero inputs the first layer cannot influence the loss, so
        both the analytic and the finite-difference gradients vanish."""
        x, y, splits = blob_data(n_per=15)
        model = train_mlp(x, y, splits,
                          TrainParams(hidden=10, dropout=0.0, epochs=15,
                                      weight_decay=0.0, seed=0))
        zeros = np.zeros_like(x[:20])
        from ndls.model import _loss_and_grads
        loss, grads = _loss_and_grads(model.weights, model.hidden, zeros,
                                      y[:20], 0.0)
        np.testing.assert_array_equal(grads["W1"], 0.0)
        perturbed = {k: v.copy() for k, v in model.weights.items()}
        perturbed["W1"][0, 0] += 1e-3
        loss2, _ = _loss_and_grads(perturbed, model.hidden, zeros, y[:20], 0.0)
        assert loss2 == loss  # exact match, not just close
