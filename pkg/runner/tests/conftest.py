"""Shared fixtures: tiny on-disk datasets and a run directory produced
through the primary package's command-line interface (the only coupling
point between the two packages)."""

import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

T_LEN = 24
N_FEAT = 2


def write_dataset(root: Path, name: str, task: str, x_train, y_train,
                  x_test, y_test, class_names=None):
    ds_dir = root / name
    ds_dir.mkdir(parents=True)
    meta = {
        "name": name,
        "task": task,
        "seq_length": x_train.shape[1],
        "n_features": x_train.shape[2],
        "description": f"synthetic {task} fixture",
        "feature_descriptions": [f"channel {i}"
                                 for i in range(x_train.shape[2])],
    }
    if class_names is not None:
        meta["class_names"] = list(class_names)
    (ds_dir / "meta.json").write_text(json.dumps(meta, indent=2))
    for split, x, y in (("train", x_train, y_train),
                        ("test", x_test, y_test)):
        n_cols = x.shape[1] * x.shape[2]
        lines = [",".join([f"c{i}" for i in range(n_cols)] + ["label"])]
        for xi, yi in zip(x, y):
            label = str(int(yi)) if task == "classification" \
                else f"{yi:.6f}"
            lines.append(",".join(f"{v:.6f}" for v in xi.ravel())
                         + "," + label)
        (ds_dir / f"X_{split}.csv").write_text("\n".join(lines) + "\n")
    return ds_dir


def make_cls_arrays(n_per=20, n_test_per=6, seed=11):
    """Two well-separated positive class means (positive so ReLU features
    carry the signal) with interleaved training rows, so the trailing
    validation split contains both classes."""
    rng = np.random.default_rng(seed)

    def draw(n, center):
        return center + 0.1 * rng.standard_normal((n, T_LEN, N_FEAT))

    x_train = np.concatenate([draw(n_per, 0.5), draw(n_per, 3.0)])
    y_train = np.array([0] * n_per + [1] * n_per)
    perm = np.random.default_rng(5).permutation(2 * n_per)
    x_test = np.concatenate([draw(n_test_per, 0.5),
                             draw(n_test_per, 3.0)])
    y_test = np.array([0] * n_test_per + [1] * n_test_per)
    return x_train[perm], y_train[perm], x_test, y_test


def make_reg_arrays(n_train=40, n_test=12, seed=12):
    """Per-sample offset plus noise; the target is the exact mean of the
    sample, so y is recoverable by global average pooling."""
    rng = np.random.default_rng(seed)

    def draw(n):
        offsets = rng.uniform(-1.0, 1.0, size=(n, 1, 1))
        x = offsets + 0.05 * rng.standard_normal((n, T_LEN, N_FEAT))
        return x, x.mean(axis=(1, 2))

    x_train, y_train = draw(n_train)
    x_test, y_test = draw(n_test)
    return x_train, y_train, x_test, y_test


def _fenced(obj_text: str) -> str:
    return f"```python\n{obj_text}\n```\n"

_SPACE = """\
Proposed search space:
""" + _fenced("""{
    "layer_type": ["Conv1D", "Dense"],
    "Conv1D_kernel_size": [3],
    "Conv1D_filters": [4, 8],
    "Dense_units": [8],
    "activation": ["relu"],
    "pooling_type": ["average"],
    "pool_size": [2]
}""")


def _search_response(filters: int, out_units: int, out_act: str) -> str:
    config = json.dumps({"layer_sequence": [
        {"layer_type": "Conv1D", "filters": filters, "kernel_size": 3,
         "activation": "relu", "strides": 1},
        {"layer_type": "GlobalAvgPool1D"},
        {"layer_type": "Dense", "units": out_units,
         "activation": out_act},
    ]}, indent=4)
    return ("#### Model Configuration #1\n" + _fenced(config)
            + "\nA single small convolution keeps the footprint tiny.\n")


def make_fixture(path: Path, filters: int, out_units: int,
                 out_act: str) -> Path:
    entries = [
        {"stage": "design", "content": _SPACE},
        {"stage": "search",
         "content": _search_response(filters, out_units, out_act)},
        {"stage": "eval",
         "content": "Model Configuration #1 fits the budget comfortably "
                    "and should train well."},
    ]
    path.write_text("\n".join(json.dumps(e) for e in entries) + "\n")
    return path


def _cli(name: str) -> str:
    exe = shutil.which(name)
    if exe is None:
        pytest.fail(f"console script {name!r} not installed")
    return exe


def make_run_dir(data_root: Path, dataset: str, fixture: Path,
                 out_dir: Path) -> Path:
    """Produce a run directory with the primary package's CLI."""
    proc = subprocess.run(
        [_cli("naquery"), "query", "--data", str(data_root),
         "--name", dataset, "--prompt", f"build a tiny model for {dataset}",
         "--backend", "mock", "--mock-fixture", str(fixture),
         "--out", str(out_dir), "--no-rewrite",
         "--budget", "1", "--candidates", "1"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr + proc.stdout
    assert (out_dir / "report.json").is_file()
    return out_dir


@pytest.fixture(scope="session")
def data_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    write_dataset(root, "beat2", "classification", *make_cls_arrays(),
                  class_names=["low", "high"])
    write_dataset(root, "drift", "regression", *make_reg_arrays())
    return root


@pytest.fixture(scope="session")
def cls_run_dir(data_root, tmp_path_factory):
    base = tmp_path_factory.mktemp("runs")
    fixture = make_fixture(base / "cls_fixture.jsonl", 8, 2, "softmax")
    return make_run_dir(data_root, "beat2", fixture, base / "cls_run")


@pytest.fixture(scope="session")
def reg_run_dir(data_root, tmp_path_factory):
    base = tmp_path_factory.mktemp("runs_reg")
    fixture = make_fixture(base / "reg_fixture.jsonl", 4, 1, "linear")
    return make_run_dir(data_root, "drift", fixture, base / "reg_run")
