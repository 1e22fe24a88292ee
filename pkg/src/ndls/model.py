"""Base predictors: a two-layer MLP and a linear softmax fallback.

Training is full-batch (no mini-batching, so node order cannot leak into
the result), uses adaptive-moment gradient descent by default, and early
stops on validation accuracy.  A plain gradient-descent mode exists for
the convex linear case.  Everything is plain numpy; given a seed the
trained parameters are bit-reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, NumericalError


@dataclass(frozen=True)
class SplitMasks:
    """Disjoint train/validation/test node-id sets."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def validate(self, n: int) -> None:
        for name, ids in (("train", self.train), ("val", self.val),
                          ("test", self.test)):
            if len(ids) and (ids.min() < 0 or ids.max() >= n):
                raise DataError(f"{name} mask contains node ids outside [0, {n})")
        t, v, s = set(self.train.tolist()), set(self.val.tolist()), set(self.test.tolist())
        if t & v or t & s or v & s:
            raise DataError("train/val/test masks are not pairwise disjoint")


@dataclass
class TrainParams:
    """Trainer hyperparameters; defaults follow the declared grid bounds."""

    hidden: int | None = 64        # None selects the linear softmax model
    dropout: float = 0.5
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 1000
    patience: int = 50
    seed: int = 0
    optimizer: str = "adam"        # "adam" or "gd"


class MlpModel:
    """Trained predictor; immutable after training."""

    def __init__(self, weights: dict[str, np.ndarray], hidden: int | None,
                 params: TrainParams, best_val_accuracy: float = float("nan"),
                 epochs_trained: int = 0,
                 loss_history: list[float] | None = None,
                 val_history: list[float] | None = None):
        self.weights = weights
        self.hidden = hidden
        self.params = params
        self.best_val_accuracy = best_val_accuracy
        self.epochs_trained = epochs_trained
        self.loss_history = loss_history or []
        self.val_history = val_history or []
        for arr in weights.values():
            arr.flags.writeable = False

    @property
    def num_features(self) -> int:
        return self.weights["W1"].shape[0]

    @property
    def num_classes(self) -> int:
        key = "W1" if self.hidden is None else "W2"
        return self.weights[key].shape[1]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _init_weights(num_features: int, hidden: int | None, num_classes: int,
                  rng: np.random.Generator) -> dict[str, np.ndarray]:
    # Hidden layer gets uniform fan-in scaling; the output layer starts at
    # zero so an untrained model predicts the uniform distribution.
    if hidden is None:
        return {"W1": np.zeros((num_features, num_classes)),
                "b1": np.zeros(num_classes)}
    bound = 1.0 / np.sqrt(num_features)
    return {
        "W1": rng.uniform(-bound, bound, size=(num_features, hidden)),
        "b1": np.zeros(hidden),
        "W2": np.zeros((hidden, num_classes)),
        "b2": np.zeros(num_classes),
    }


def _forward(weights: dict, hidden: int | None, x: np.ndarray,
             dropout: float = 0.0, rng: np.random.Generator | None = None):
    """Returns (logits, cache for backward)."""
    if hidden is None:
        return x @ weights["W1"] + weights["b1"], {"x": x}
    z1 = x @ weights["W1"] + weights["b1"]
    a1 = np.maximum(z1, 0.0)
    if dropout > 0.0 and rng is not None:
        keep = rng.random(a1.shape) >= dropout
        a1 = a1 * keep / (1.0 - dropout)
        cache = {"x": x, "z1": z1, "a1": a1, "keep": keep}
    else:
        cache = {"x": x, "z1": z1, "a1": a1, "keep": None}
    return a1 @ weights["W2"] + weights["b2"], cache


def _loss_and_grads(weights: dict, hidden: int | None, x: np.ndarray,
                    y: np.ndarray, weight_decay: float, dropout: float = 0.0,
                    rng: np.random.Generator | None = None):
    """Mean cross-entropy over the batch plus L2 penalty, with gradients."""
    logits, cache = _forward(weights, hidden, x, dropout=dropout, rng=rng)
    logp = _log_softmax(logits)
    batch = x.shape[0]
    loss = -logp[np.arange(batch), y].mean()
    penalty = 0.0
    for name in ("W1", "W2"):
        if name in weights:
            penalty += 0.5 * weight_decay * float((weights[name] ** 2).sum())
    loss += penalty

    dlogits = np.exp(logp)
    dlogits[np.arange(batch), y] -= 1.0
    dlogits /= batch

    grads = {}
    if hidden is None:
        grads["W1"] = cache["x"].T @ dlogits + weight_decay * weights["W1"]
        grads["b1"] = dlogits.sum(axis=0)
    else:
        grads["W2"] = cache["a1"].T @ dlogits + weight_decay * weights["W2"]
        grads["b2"] = dlogits.sum(axis=0)
        da1 = dlogits @ weights["W2"].T
        if cache["keep"] is not None:
            da1 = da1 * cache["keep"] / (1.0 - dropout)
        dz1 = da1 * (cache["z1"] > 0.0)
        grads["W1"] = cache["x"].T @ dz1 + weight_decay * weights["W1"]
        grads["b1"] = dz1.sum(axis=0)
    return float(loss), grads


def train_mlp(features: np.ndarray, labels: np.ndarray, splits: SplitMasks,
              params: TrainParams) -> MlpModel:
    """Train the predictor on the train mask, early stopping on val accuracy.

    Returns the parameters of the best validation epoch.  Deterministic
    given ``params.seed``; raises :class:`NumericalError` if the loss or
    any parameter stops being finite.
    """
    x = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if len(splits.train) == 0:
        raise ConfigError("training set is empty")
    splits.validate(x.shape[0])
    if labels.shape[0] != x.shape[0]:
        raise DataError("labels and features cover different node counts")
    for name, ids in (("train", splits.train), ("val", splits.val)):
        if len(ids) and (labels[ids] < 0).any():
            raise DataError(f"unlabeled nodes in the {name} mask")

    # Sorting makes the result invariant to the order ids were listed in.
    train_ids = np.sort(np.asarray(splits.train, dtype=np.int64))
    val_ids = np.sort(np.asarray(splits.val, dtype=np.int64))
    x_train, y_train = x[train_ids], labels[train_ids]
    x_val, y_val = x[val_ids], labels[val_ids]

    num_classes = int(labels.max()) + 1
    rng = np.random.default_rng(params.seed)
    weights = _init_weights(x.shape[1], params.hidden, num_classes, rng)

    adam_m = {k: np.zeros_like(v) for k, v in weights.items()}
    adam_v = {k: np.zeros_like(v) for k, v in weights.items()}
    beta1, beta2, eps_hat = 0.9, 0.999, 1e-8

    def val_accuracy(w):
        if len(val_ids) == 0:
            return float("nan")
        logits, _ = _forward(w, params.hidden, x_val)
        return float((logits.argmax(axis=1) == y_val).mean())

    best_weights = {k: v.copy() for k, v in weights.items()}
    best_acc = val_accuracy(weights)
    best_epoch = 0
    since_best = 0
    loss_history: list[float] = []
    val_history: list[float] = []

    for epoch in range(params.epochs):
        loss, grads = _loss_and_grads(
            weights, params.hidden, x_train, y_train, params.weight_decay,
            dropout=params.dropout, rng=rng,
        )
        if not np.isfinite(loss):
            raise NumericalError(f"training diverged at epoch {epoch}", epoch=epoch)
        loss_history.append(loss)
        if params.optimizer == "adam":
            t = epoch + 1
            for k in weights:
                adam_m[k] = beta1 * adam_m[k] + (1 - beta1) * grads[k]
                adam_v[k] = beta2 * adam_v[k] + (1 - beta2) * grads[k] ** 2
                m_hat = adam_m[k] / (1 - beta1 ** t)
                v_hat = adam_v[k] / (1 - beta2 ** t)
                weights[k] = weights[k] - params.learning_rate * m_hat / (
                    np.sqrt(v_hat) + eps_hat)
        elif params.optimizer == "gd":
            for k in weights:
                weights[k] = weights[k] - params.learning_rate * grads[k]
        else:
            raise ConfigError(f"unknown optimizer {params.optimizer!r}")
        if not all(np.isfinite(w).all() for w in weights.values()):
            raise NumericalError(f"training diverged at epoch {epoch}", epoch=epoch)

        acc = val_accuracy(weights)
        val_history.append(acc)
        if np.isnan(best_acc) or (not np.isnan(acc) and acc > best_acc):
            best_acc = acc
            best_weights = {k: v.copy() for k, v in weights.items()}
            best_epoch = epoch + 1
            since_best = 0
        else:
            since_best += 1
            if since_best > params.patience:
                break

    return MlpModel(weights=best_weights, hidden=params.hidden, params=params,
                    best_val_accuracy=best_acc, epochs_trained=best_epoch,
                    loss_history=loss_history, val_history=val_history)


def predict_soft(model: MlpModel, features: np.ndarray) -> np.ndarray:
    """Softmax class probabilities per row; dropout disabled."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.num_features:
        raise DataError(
            f"feature width {x.shape[-1]} does not match the model "
            f"({model.num_features})"
        )
    logits, _ = _forward(model.weights, model.hidden, x)
    return _softmax(logits)


def evaluate_accuracy(soft_labels: np.ndarray, labels: np.ndarray,
                      mask: np.ndarray) -> float:
    """Fraction of mask nodes whose argmax prediction matches the label.

    Argmax ties resolve to the lowest class index.
    """
    mask = np.asarray(mask, dtype=np.int64)
    if len(mask) == 0:
        raise ConfigError("evaluation mask is empty")
    labels = np.asarray(labels)
    if (labels[mask] < 0).any():
        raise DataError("unlabeled nodes in the evaluation mask")
    pred = np.asarray(soft_labels)[mask].argmax(axis=1)
    return float((pred == labels[mask]).mean())


# ---------------------------------------------------------------------------
# hyperparameter grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HyperGrid:
    """Candidate lists for the threshold and the two model knobs."""

    epsilons: tuple = (0.01, 0.03, 0.05)
    dropouts: tuple = (0.2, 0.4, 0.6, 0.8)
    learning_rates: tuple = (0.1, 0.01, 0.001)

    def validate(self) -> None:
        for name, values in (("epsilons", self.epsilons),
                             ("dropouts", self.dropouts),
                             ("learning_rates", self.learning_rates)):
            if not len(values):
                raise ConfigError(f"hyperparameter grid {name} is empty")


@dataclass(frozen=True)
class GridCell:
    epsilon: float
    dropout: float
    learning_rate: float


@dataclass
class GridSearchResult:
    best: GridCell
    best_artifact: object
    table: list = field(default_factory=list)


def grid_search(grid: HyperGrid, train_fn, eval_fn) -> GridSearchResult:
    """Exhaustive sweep; best cell has the highest evaluation score.

    Ties break toward the smallest epsilon, then dropout, then learning
    rate.  ``train_fn(cell)`` produces an artifact, ``eval_fn(cell,
    artifact)`` scores it; the full per-cell table is returned.
    """
    grid.validate()
    best_key = None
    best_cell = None
    best_artifact = None
    table = []
    for eps, dropout, lr in itertools.product(grid.epsilons, grid.dropouts,
                                              grid.learning_rates):
        cell = GridCell(epsilon=float(eps), dropout=float(dropout),
                        learning_rate=float(lr))
        artifact = train_fn(cell)
        score = float(eval_fn(cell, artifact))
        table.append({"epsilon": cell.epsilon, "dropout": cell.dropout,
                      "learning_rate": cell.learning_rate,
                      "val_accuracy": score})
        key = (-score, cell.epsilon, cell.dropout, cell.learning_rate)
        if best_key is None or key < best_key:
            best_key, best_cell, best_artifact = key, cell, artifact
    return GridSearchResult(best=best_cell, best_artifact=best_artifact,
                            table=table)


def gradient_check(model: MlpModel, features: np.ndarray, labels: np.ndarray,
                   sample_params: int = 5, step: float = 1e-5,
                   seed: int = 0) -> float:
    """Max relative error of analytic gradients vs central differences.

    Dropout is disabled; ``sample_params`` coordinates are probed per
    parameter tensor with the given finite-difference step in float64.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    weights = {k: v.copy() for k, v in model.weights.items()}
    wd = model.params.weight_decay
    _, grads = _loss_and_grads(weights, model.hidden, x, y, wd)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, tensor in weights.items():
        flat = tensor.reshape(-1)
        count = min(sample_params, flat.size)
        for idx in rng.choice(flat.size, size=count, replace=False):
            original = flat[idx]
            flat[idx] = original + step
            plus, _ = _loss_and_grads(weights, model.hidden, x, y, wd)
            flat[idx] = original - step
            minus, _ = _loss_and_grads(weights, model.hidden, x, y, wd)
            flat[idx] = original
            numeric = (plus - minus) / (2.0 * step)
            analytic = grads[name].reshape(-1)[idx]
            scale = max(abs(numeric), abs(analytic), 1e-8)
            worst = max(worst, abs(numeric - analytic) / scale)
    return worst
