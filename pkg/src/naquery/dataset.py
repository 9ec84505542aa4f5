"""Time-series dataset loading and per-group representative series.

On-disk layout of a dataset directory:

    meta.json     keys: name, task, seq_length, n_features, class_names
                  (classification only), description, feature_descriptions
    X_train.csv   one row per sample: t0_f0,...,t{T-1}_f{d-1},label
    X_test.csv    same header as X_train.csv

Values are UTF-8, '.' decimal separator, time-major flattening. Empty cells
are imputed at load time: forward-fill along time per feature, then
backward-fill, then 0.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyGroup, LabelOutOfRange, MissingFile, ShapeMismatch

CLASSIFICATION = "classification"
REGRESSION = "regression"


@dataclass(frozen=True)
class TimeSeriesDataset:
    """An immutable train/test split of d-variate length-T series."""

    name: str
    task: str
    x_train: np.ndarray  # [N_train, T, d]
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    description: str = ""
    feature_descriptions: tuple[str, ...] = ()
    class_names: tuple[str, ...] | None = None

    @property
    def seq_length(self) -> int:
        return self.x_train.shape[1]

    @property
    def n_features(self) -> int:
        return self.x_train.shape[2]

    @property
    def n_train(self) -> int:
        return self.x_train.shape[0]

    @property
    def output_units(self) -> int:
        if self.task == CLASSIFICATION:
            return len(self.class_names)
        return 1

    def __post_init__(self):
        for x, y, split in ((self.x_train, self.y_train, "train"),
                            (self.x_test, self.y_test, "test")):
            if x.ndim != 3:
                raise ShapeMismatch(f"x_{split} must be 3-dimensional, got {x.ndim}")
            if len(x) != len(y):
                raise ShapeMismatch(
                    f"{split} split: {len(x)} series but {len(y)} labels")
            if x.shape[1:] != self.x_train.shape[1:]:
                raise ShapeMismatch(f"{split} split shape {x.shape[1:]} differs "
                                    f"from train {self.x_train.shape[1:]}")
            if np.isnan(x).any():
                raise ShapeMismatch(f"x_{split} contains NaN after ingestion")
        if self.seq_length < 1 or self.n_features < 1:
            raise ShapeMismatch("T and d must both be >= 1")
        if self.task == CLASSIFICATION:
            if not self.class_names:
                raise LabelOutOfRange("classification dataset needs class_names")
            n = len(self.class_names)
            for y, split in ((self.y_train, "train"), (self.y_test, "test")):
                bad = [v for v in y if not 0 <= int(v) < n or int(v) != v]
                if bad:
                    raise LabelOutOfRange(
                        f"{split} label {bad[0]} outside [0, {n}) for "
                        f"{n} class names")
        elif self.task == REGRESSION:
            if self.class_names is not None:
                raise LabelOutOfRange("regression dataset must not set class_names")
        else:
            raise ValueError(f"unknown task {self.task!r}")


@dataclass(frozen=True)
class RepresentativeSeries:
    """Timestamp-wise mean/std summary of one label group."""

    group_label: str
    mean: np.ndarray  # [T, d]
    std: np.ndarray   # [T, d]
    support_count: int

    def __post_init__(self):
        if self.mean.shape != self.std.shape:
            raise ShapeMismatch("mean/std shapes differ")
        if (self.std < 0).any():
            raise ValueError("std must be elementwise >= 0")
        if self.support_count < 1:
            raise EmptyGroup(f"group {self.group_label!r} has no members")


def _impute(series: np.ndarray) -> np.ndarray:
    """Forward-fill along time per feature, then backward-fill, then 0."""
    out = series.copy()
    t_len, d = out.shape
    for f in range(d):
        col = out[:, f]
        last = np.nan
        for t in range(t_len):
            if math.isnan(col[t]):
                col[t] = last
            else:
                last = col[t]
        nxt = np.nan
        for t in range(t_len - 1, -1, -1):
            if math.isnan(col[t]):
                col[t] = nxt
            else:
                nxt = col[t]
    out[np.isnan(out)] = 0.0
    return out


def _read_split(path: Path, t_len: int, d: int, task: str):
    if not path.is_file():
        raise MissingFile(f"missing split file: {path}")
    xs, ys = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != t_len * d + 1:
            got = 0 if header is None else len(header)
            raise ShapeMismatch(
                f"{path.name}: header has {got} columns, expected {t_len * d + 1}")
        for i, row in enumerate(reader):
            if len(row) != t_len * d + 1:
                raise ShapeMismatch(
                    f"{path.name} row {i}: {len(row)} columns, "
                    f"expected {t_len * d + 1}")
            vals = np.array(
                [float(c) if c.strip() else np.nan for c in row[:-1]],
                dtype=np.float64).reshape(t_len, d)
            xs.append(_impute(vals))
            ys.append(float(row[-1]) if task == REGRESSION else int(float(row[-1])))
    x = np.array(xs, dtype=np.float64).reshape(len(xs), t_len, d)
    dtype = np.float64 if task == REGRESSION else np.int64
    return x, np.array(ys, dtype=dtype)


def load_dataset(root_path, name: str) -> TimeSeriesDataset:
    """Load and validate a dataset directory under root_path/name."""
    root = Path(root_path) / name
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        raise MissingFile(f"missing meta.json under {root}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    task = meta["task"]
    t_len, d = int(meta["seq_length"]), int(meta["n_features"])
    x_train, y_train = _read_split(root / "X_train.csv", t_len, d, task)
    x_test, y_test = _read_split(root / "X_test.csv", t_len, d, task)
    class_names = meta.get("class_names")
    return TimeSeriesDataset(
        name=meta.get("name", name),
        task=task,
        x_train=x_train, y_train=y_train,
        x_test=x_test, y_test=y_test,
        description=meta.get("description", ""),
        feature_descriptions=tuple(meta.get("feature_descriptions", ())),
        class_names=tuple(class_names) if class_names is not None else None,
    )


def _format_num(v: float) -> str:
    return f"{v:g}"


def representative_series(ds: TimeSeriesDataset,
                          n_bins: int = 4) -> list[RepresentativeSeries]:
    """Per-group timestamp-wise mean and population std of the train split.

    Classification: one group per class (n_bins ignored). Regression:
    equal-frequency bins of y_train, labelled with half-open ranges
    "[lo, hi)" and a closed final range.
    """
    groups: list[tuple[str, np.ndarray]] = []
    if ds.task == CLASSIFICATION:
        for cls, cls_name in enumerate(ds.class_names):
            members = ds.x_train[ds.y_train == cls]
            if len(members) == 0:
                raise EmptyGroup(f"class {cls_name!r} has no training members")
            groups.append((cls_name, members))
    else:
        if n_bins < 1:
            raise ValueError("n_bins must be >= 1")
        n_bins = min(n_bins, ds.n_train)
        order = np.argsort(ds.y_train, kind="stable")
        chunks = np.array_split(order, n_bins)
        y_sorted = ds.y_train[order]
        for i, idx in enumerate(chunks):
            lo = ds.y_train[idx[0]]
            if i + 1 < len(chunks):
                hi = ds.y_train[chunks[i + 1][0]]
                label = f"[{_format_num(lo)}, {_format_num(hi)})"
            else:
                hi = y_sorted[-1]
                label = f"[{_format_num(lo)}, {_format_num(hi)}]"
            groups.append((label, ds.x_train[idx]))
    reps = []
    for label, members in groups:
        reps.append(RepresentativeSeries(
            group_label=label,
            mean=members.mean(axis=0),
            std=members.std(axis=0),  # population std: single members give 0
            support_count=len(members),
        ))
    return reps
