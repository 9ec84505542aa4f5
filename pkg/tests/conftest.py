"""Shared fixtures: synthetic dataset directories and fixture helpers."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from naquery.archir import ArchitectureIR, LayerSpec

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "naquery" / \
    "assets" / "fixtures"

CLS_FIXTURE = FIXTURES / "demo_cls.jsonl"
REG_FIXTURE = FIXTURES / "demo_reg.jsonl"


def write_dataset(root: Path, name: str, task: str, x_train, y_train,
                  x_test, y_test, class_names=None, description="",
                  feature_descriptions=()) -> Path:
    """Materialize arrays as an on-disk dataset directory."""
    d = root / name
    d.mkdir(parents=True, exist_ok=True)
    t_len, n_feat = x_train.shape[1], x_train.shape[2]
    meta = {"name": name, "task": task, "seq_length": t_len,
            "n_features": n_feat, "description": description,
            "feature_descriptions": list(feature_descriptions)}
    if class_names is not None:
        meta["class_names"] = list(class_names)
    (d / "meta.json").write_text(json.dumps(meta), encoding="utf-8")
    header = [f"t{t}_f{f}" for t in range(t_len) for f in range(n_feat)]
    for split, (x, y) in (("X_train", (x_train, y_train)),
                          ("X_test", (x_test, y_test))):
        with open(d / f"{split}.csv", "w", newline="",
                  encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header + ["label"])
            for xi, yi in zip(x, y):
                label = (f"{yi:.6f}" if task == "regression"
                         else str(int(yi)))
                w.writerow([f"{v:.6f}" for v in xi.reshape(-1)] + [label])
    return root


def make_cls_arrays(n_classes=6, n_per=4, t_len=64, n_feat=3, seed=0):
    """Separable classes: class-specific sine frequencies plus noise."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for c in range(n_classes):
        for _ in range(n_per):
            base = np.sin(np.arange(t_len)[:, None] * (c + 1) / 10.0)
            xs.append(base + 0.1 * rng.standard_normal((t_len, n_feat)))
            ys.append(c)
    return np.array(xs), np.array(ys)


def make_reg_arrays(n=16, t_len=100, n_feat=2, seed=1):
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for _ in range(n):
        y = 90.0 + 10.0 * rng.random()
        base = np.sin(np.arange(t_len)[:, None] * y / 200.0)
        xs.append(base + 0.05 * rng.standard_normal((t_len, n_feat)))
        ys.append(y)
    return np.array(xs), np.array(ys)


@pytest.fixture
def cls_data_dir(tmp_path):
    """Six-class, 64x3 dataset matching the classification demo fixture."""
    x_tr, y_tr = make_cls_arrays(seed=0)
    x_te, y_te = make_cls_arrays(n_per=2, seed=7)
    return write_dataset(
        tmp_path / "data", "motion6", "classification",
        x_tr, y_tr, x_te, y_te,
        class_names=["walking", "upstairs", "downstairs", "sitting",
                     "standing", "laying"],
        description="Synthetic 3-axis accelerometer motions.",
        feature_descriptions=["acc x", "acc y", "acc z"])


@pytest.fixture
def reg_data_dir(tmp_path):
    """Two-feature regression dataset matching the regression demo
    fixture."""
    x_tr, y_tr = make_reg_arrays(seed=1)
    x_te, y_te = make_reg_arrays(n=8, seed=9)
    return write_dataset(
        tmp_path / "data", "spo2", "regression",
        x_tr, y_tr, x_te, y_te,
        description="Synthetic pulse/cardiac windows with saturation "
                    "labels.",
        feature_descriptions=["ppg", "ecg"])


def make_fixture(path: Path, entries) -> Path:
    """Write a (stage, content) sequence as a mock-backend fixture."""
    with open(path, "w", encoding="utf-8") as fh:
        for stage, content in entries:
            fh.write(json.dumps({"stage": stage, "content": content})
                     + "\n")
    return path


def simple_cls_arch(t_len=64, n_feat=3, n_classes=6) -> ArchitectureIR:
    return ArchitectureIR(
        layers=(
            LayerSpec(kind="Conv1D", filters=8, kernel_size=3,
                      activation="relu"),
            LayerSpec(kind="MaxPool1D", kernel_size=2, strides=2),
            LayerSpec(kind="LSTM", units=16, activation="tanh",
                      return_sequences=False),
            LayerSpec(kind="Dense", units=n_classes, activation="softmax"),
        ),
        input_shape=(t_len, n_feat), output_units=n_classes,
        task="classification")
