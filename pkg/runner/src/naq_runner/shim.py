"""Source text for the ``utils`` helper package materialized next to a
training script before execution.

Generated scripts import ``utils.data_loader.load_dataset``,
``utils.data_desc`` catalog lists, and ``utils.quantize_model`` /
``utils.brief_profile_model``. The harness writes these modules into the
sandbox instead of modifying the script. Two environment variables form
the contract with the subprocess:

    NAQ_DATA_DIR   root directory containing one sub-directory per dataset
    NAQ_EPOCHS     optional; overrides the epoch count of every model.fit
                   call (applied by wrapping keras.Model.fit at import
                   time, so the script file itself stays byte-identical)
"""

from __future__ import annotations

from pathlib import Path

UTILS_INIT = '''\
"""Helper package for generated training scripts."""
import os

import numpy as np
import tensorflow as tf
from tensorflow import keras

from .data_loader import load_dataset  # noqa: F401

if os.environ.get("NAQ_EPOCHS"):
    _original_fit = keras.Model.fit

    def _overridden_fit(self, *args, **kwargs):
        kwargs["epochs"] = int(os.environ["NAQ_EPOCHS"])
        return _original_fit(self, *args, **kwargs)

    keras.Model.fit = _overridden_fit

# Older Keras accepted a bare metric object for compile(metrics=...);
# current releases require a list. Generated scripts target the older
# calling convention, so normalize it here instead of editing them.
_original_compile = keras.Model.compile

def _compat_compile(self, *args, **kwargs):
    metrics = kwargs.get("metrics")
    if metrics is not None and not isinstance(metrics, (list, tuple, dict)):
        kwargs["metrics"] = [metrics]
    return _original_compile(self, *args, **kwargs)

keras.Model.compile = _compat_compile


def quantize_model(model, x_train):
    """Post-training quantization with a representative sample of the
    training inputs; returns the serialized flatbuffer bytes."""
    converter = tf.lite.TFLiteConverter.from_keras_model(model)
    converter.optimizations = [tf.lite.Optimize.DEFAULT]
    samples = np.asarray(x_train, dtype=np.float32)[:64]

    def representative():
        for row in samples:
            yield [row[np.newaxis, ...]]

    converter.representative_dataset = representative
    return converter.convert()


def brief_profile_model(path):
    """One-line size summary of a converted model artifact."""
    size = os.path.getsize(path)
    print(f"artifact={os.path.basename(path)} size_bytes={size}")
'''

DATA_LOADER = '''\
"""Minimal CSV time-series reader for generated training scripts.

Layout per dataset directory: meta.json (seq_length, n_features, task,
class_names for classification) plus X_train.csv / X_test.csv with one
flattened time-major sample per row, label in the last column.
"""
import csv
import json
import os
from pathlib import Path

import numpy as np


def _read_split(path, t_len, n_feat, task):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    x = np.array([[float(c) if c.strip() else 0.0 for c in row[:-1]]
                  for row in rows], dtype=np.float32)
    x = x.reshape(len(rows), t_len, n_feat)
    if task == "classification":
        y = np.array([int(float(row[-1])) for row in rows], dtype=np.int64)
    else:
        y = np.array([float(row[-1]) for row in rows], dtype=np.float32)
    return x, y


def load_dataset(name, task):
    root = Path(os.environ["NAQ_DATA_DIR"]) / name
    meta = json.loads((root / "meta.json").read_text(encoding="utf-8"))
    t_len, n_feat = int(meta["seq_length"]), int(meta["n_features"])
    x_train, y_train = _read_split(root / "X_train.csv", t_len, n_feat, task)
    x_test, y_test = _read_split(root / "X_test.csv", t_len, n_feat, task)
    if task == "classification":
        return x_train, y_train, x_test, y_test, list(meta["class_names"])
    return x_train, y_train, x_test, y_test
'''

DATA_DESC = '''\
"""Dataset catalog, discovered from the data directory at import time."""
import json
import os
from pathlib import Path


def _scan():
    root = os.environ.get("NAQ_DATA_DIR")
    cls, reg = [], []
    if root:
        for meta_path in sorted(Path(root).glob("*/meta.json")):
            try:
                meta = json.loads(meta_path.read_text(encoding="utf-8"))
            except (OSError, ValueError):
                continue
            bucket = cls if meta.get("task") == "classification" else reg
            bucket.append(meta_path.parent.name)
    return cls, reg


CLS_DATASETS, REG_DATASETS = _scan()
AVAILABLE_DATASETS = CLS_DATASETS + REG_DATASETS
'''


def write_shim(target: Path) -> None:
    """Materialize the utils package under `target` (a directory named
    ``utils`` inside the sandbox)."""
    target.mkdir(parents=True, exist_ok=True)
    (target / "__init__.py").write_text(UTILS_INIT, encoding="utf-8")
    (target / "data_loader.py").write_text(DATA_LOADER, encoding="utf-8")
    (target / "data_desc.py").write_text(DATA_DESC, encoding="utf-8")
