"""File formats for graphs, matrices, labels, splits, and checkpoints.

Feature and soft-label matrices travel either as UTF-8 CSV (one row per
node) or as a raw little-endian binary: an 8-byte header of two uint32
values (rows, cols) followed by float32 row-major data.  Model
checkpoints are a versioned binary container with the magic "NDLSMLP1"
plus a JSON hyperparameter sidecar.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .lsi import LsiVector
from .model import MlpModel, SplitMasks, TrainParams

CHECKPOINT_MAGIC = b"NDLSMLP1"


def _is_csv(path: str | Path, fmt: str | None) -> bool:
    if fmt is not None:
        if fmt not in ("csv", "binary"):
            raise DataError(f"unknown matrix format {fmt!r}")
        return fmt == "csv"
    return str(path).endswith(".csv")


def save_matrix(path: str | Path, matrix: np.ndarray, fmt: str | None = None) -> None:
    """Write a dense 2-d matrix as CSV or binary (chosen by suffix)."""
    x = np.asarray(matrix)
    if x.ndim != 2:
        raise DataError(f"expected a 2-d matrix, got shape {x.shape}")
    if _is_csv(path, fmt):
        np.savetxt(path, x, delimiter=",", fmt="%.10g")
        return
    with open(path, "wb") as handle:
        handle.write(struct.pack("<II", x.shape[0], x.shape[1]))
        handle.write(np.ascontiguousarray(x, dtype="<f4").tobytes())


def load_matrix(path: str | Path, fmt: str | None = None) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix`.

    CSV loads as float64; binary loads as the stored float32.
    """
    if _is_csv(path, fmt):
        data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        return data
    with open(path, "rb") as handle:
        header = handle.read(8)
        if len(header) != 8:
            raise DataError(f"{path}: truncated binary matrix header")
        rows, cols = struct.unpack("<II", header)
        payload = handle.read()
    expected = rows * cols * 4
    if len(payload) != expected:
        raise DataError(
            f"{path}: expected {expected} payload bytes for a {rows}x{cols} "
            f"matrix, found {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(rows, cols).copy()


def load_labels(path: str | Path, n: int | None = None) -> np.ndarray:
    """One integer class per line; -1 denotes an unlabeled node."""
    labels = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise DataError(
                    f"label file line {lineno}: non-integer label {line!r}"
                ) from None
    out = np.asarray(labels, dtype=np.int64)
    if n is not None and len(out) != n:
        raise DataError(f"{path}: {len(out)} labels for {n} nodes")
    return out


def save_labels(path: str | Path, labels: np.ndarray) -> None:
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d")


def load_node_ids(path: str | Path) -> np.ndarray:
    """One node id per line (split-mask files)."""
    ids = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                ids.append(int(line))
            except ValueError:
                raise DataError(
                    f"split file line {lineno}: non-integer node id {line!r}"
                ) from None
    return np.asarray(ids, dtype=np.int64)


def save_node_ids(path: str | Path, ids: np.ndarray) -> None:
    np.savetxt(path, np.asarray(ids, dtype=np.int64), fmt="%d")


def load_splits(train_path: str | Path, val_path: str | Path,
                test_path: str | Path) -> SplitMasks:
    return SplitMasks(train=load_node_ids(train_path),
                      val=load_node_ids(val_path),
                      test=load_node_ids(test_path))


def save_splits(splits: SplitMasks, train_path: str | Path,
                val_path: str | Path, test_path: str | Path) -> None:
    save_node_ids(train_path, splits.train)
    save_node_ids(val_path, splits.val)
    save_node_ids(test_path, splits.test)


# ---------------------------------------------------------------------------
# smoothing-iteration vectors
# ---------------------------------------------------------------------------


def save_lsi_csv(path: str | Path, lsi: LsiVector) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("node_id,k\n")
        for node, k in enumerate(lsi.values):
            handle.write(f"{node},{int(k)}\n")


def load_lsi_csv(path: str | Path) -> np.ndarray:
    """Returns the (node_id, k) pairs; metadata lives in the npz sidecar."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    return data


def save_lsi_npz(path: str | Path, lsi: LsiVector) -> None:
    np.savez(
        path, values=lsi.values, epsilon=lsi.epsilon, k_max=lsi.k_max,
        method=lsi.method, capped_nodes=lsi.capped_nodes, r=lsi.r,
        probes=-1 if lsi.probes is None else lsi.probes,
        low_confidence=lsi.low_confidence,
    )


def load_lsi_npz(path: str | Path) -> LsiVector:
    with np.load(path) as data:
        probes = int(data["probes"])
        return LsiVector(
            values=data["values"],
            epsilon=float(data["epsilon"]),
            k_max=int(data["k_max"]),
            method=str(data["method"]),
            capped_nodes=data["capped_nodes"],
            r=float(data["r"]),
            probes=None if probes < 0 else probes,
            low_confidence=bool(data["low_confidence"]),
        )


# ---------------------------------------------------------------------------
# model checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path: str | Path, model: MlpModel) -> None:
    """Versioned binary container plus a JSON hyperparameter sidecar."""
    hidden = 0 if model.hidden is None else model.hidden
    order = ["W1", "b1"] if model.hidden is None else ["W1", "b1", "W2", "b2"]
    with open(path, "wb") as handle:
        handle.write(CHECKPOINT_MAGIC)
        handle.write(struct.pack("<III", model.num_features, hidden,
                                 model.num_classes))
        for name in order:
            handle.write(np.ascontiguousarray(
                model.weights[name], dtype="<f8").tobytes())
    sidecar = {
        "hidden": model.hidden,
        "dropout": model.params.dropout,
        "learning_rate": model.params.learning_rate,
        "weight_decay": model.params.weight_decay,
        "epochs": model.params.epochs,
        "patience": model.params.patience,
        "seed": model.params.seed,
        "optimizer": model.params.optimizer,
        "best_val_accuracy": model.best_val_accuracy,
        "epochs_trained": model.epochs_trained,
    }
    with open(f"{path}.json", "w", encoding="utf-8") as handle:
        json.dump(sidecar, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_checkpoint(path: str | Path) -> MlpModel:
    with open(path, "rb") as handle:
        magic = handle.read(8)
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: bad checkpoint magic {magic!r}")
        num_features, hidden, num_classes = struct.unpack("<III", handle.read(12))
        payload = handle.read()

    def take(offset, shape):
        size = int(np.prod(shape)) * 8
        chunk = payload[offset:offset + size]
        if len(chunk) != size:
            raise DataError(f"{path}: truncated checkpoint payload")
        return np.frombuffer(chunk, dtype="<f8").reshape(shape).copy(), offset + size

    offset = 0
    if hidden == 0:
        w1, offset = take(offset, (num_features, num_classes))
        b1, offset = take(offset, (num_classes,))
        weights = {"W1": w1, "b1": b1}
        hidden_val = None
    else:
        w1, offset = take(offset, (num_features, hidden))
        b1, offset = take(offset, (hidden,))
        w2, offset = take(offset, (hidden, num_classes))
        b2, offset = take(offset, (num_classes,))
        weights = {"W1": w1, "b1": b1, "W2": w2, "b2": b2}
        hidden_val = hidden
    if offset != len(payload):
        raise DataError(f"{path}: {len(payload) - offset} trailing checkpoint bytes")

    params = TrainParams(hidden=hidden_val)
    best_acc = float("nan")
    epochs_trained = 0
    sidecar_path = Path(f"{path}.json")
    if sidecar_path.exists():
        with open(sidecar_path, "r", encoding="utf-8") as handle:
            sidecar = json.load(handle)
        params = TrainParams(
            hidden=hidden_val,
            dropout=sidecar.get("dropout", 0.5),
            learning_rate=sidecar.get("learning_rate", 0.01),
            weight_decay=sidecar.get("weight_decay", 5e-4),
            epochs=sidecar.get("epochs", 1000),
            patience=sidecar.get("patience", 50),
            seed=sidecar.get("seed", 0),
            optimizer=sidecar.get("optimizer", "adam"),
        )
        best_acc = sidecar.get("best_val_accuracy", float("nan"))
        epochs_trained = sidecar.get("epochs_trained", 0)
    return MlpModel(weights=weights, hidden=hidden_val, params=params,
                    best_val_accuracy=best_acc, epochs_trained=epochs_trained)


def write_json(path: str | Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(obj, handle, indent=2, sort_keys=True)
        handle.write("\n")
