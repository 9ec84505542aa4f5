"""Subprocess execution of emitted training scripts and measurement of
the outcome (metric, quantized-artifact size, wall time).

The harness never edits the script. It copies it into a sandbox directory
named after the dataset (scripts derive the dataset name from their own
filename), materializes the ``utils`` helper package beside it, and runs
it with the current interpreter. One script executes at a time.
"""

from __future__ import annotations

import contextlib
import math
import os
import shutil
import subprocess
import sys
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import RunnerError, RuntimeFailure, TimeoutExceeded
from .shim import write_shim

CONSISTENT_RATIO_RANGE = (0.5, 3.0)


@dataclass(frozen=True)
class RunResult:
    """Measured outcome of one script execution."""

    metric_name: str          # "accuracy" or "rmse"
    metric_value: float
    artifact_bytes: int       # size of the converted model, 0 if missing
    artifact_path: str | None
    wall_s: float
    stdout: str
    stderr: str

    def __post_init__(self):
        if not math.isfinite(self.metric_value):
            raise ValueError(f"metric_value must be finite, "
                             f"got {self.metric_value!r}")
        if self.artifact_bytes < 0:
            raise ValueError("artifact_bytes must be >= 0")
        if (self.artifact_path is None) != (self.artifact_bytes == 0):
            raise ValueError("artifact_path must be set exactly when "
                             "artifact_bytes > 0")
        if self.wall_s < 0:
            raise ValueError("wall_s must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


def _metric_name(script_text: str) -> str:
    return "accuracy" if 'task = "classification"' in script_text else "rmse"


def _parse_metric(stdout: str) -> float:
    """The evaluation metric is the last stdout line that is a bare
    number (the script prints it on its own line after training)."""
    value = None
    for line in stdout.splitlines():
        token = line.strip()
        if not token:
            continue
        try:
            parsed = float(token)
        except ValueError:
            continue
        if math.isfinite(parsed):
            value = parsed
    if value is None:
        raise RuntimeFailure("script printed no metric value\n"
                             f"stdout was:\n{stdout}")
    return value


def execute_script(script_path, data_dir, epochs_override: int | None = None,
                   *, dataset_name: str | None = None,
                   timeout_s: float = 600.0,
                   keep_dir=None) -> RunResult:
    """Run one emitted training script against a dataset directory.

    The script is copied into a sandbox as ``<dataset_name>.py`` (scripts
    resolve their dataset from their filename; emitted files are named
    ``train_<dataset>.py``, so the default strips that prefix). With
    `keep_dir` set, the sandbox is created there and preserved — the
    converted artifact ends up under ``<keep_dir>/models/``; otherwise a
    temporary directory is used and removed afterwards.
    """
    script_path = Path(script_path)
    data_dir = Path(data_dir)
    if not script_path.is_file():
        raise RunnerError(f"no script at {script_path}")
    if not data_dir.is_dir():
        raise RunnerError(f"no data directory at {data_dir}")
    name = dataset_name or script_path.stem.removeprefix("train_")

    with contextlib.ExitStack() as stack:
        if keep_dir is not None:
            sandbox = Path(keep_dir)
            sandbox.mkdir(parents=True, exist_ok=True)
        else:
            sandbox = Path(stack.enter_context(
                tempfile.TemporaryDirectory(prefix="naq-exec-")))
        script_name = f"{name}.py"
        shutil.copyfile(script_path, sandbox / script_name)
        write_shim(sandbox / "utils")

        env = dict(os.environ)
        env["NAQ_DATA_DIR"] = str(data_dir.resolve())
        if epochs_override is not None:
            if epochs_override < 1:
                raise ValueError("epochs_override must be >= 1")
            env["NAQ_EPOCHS"] = str(int(epochs_override))

        started = time.monotonic()
        try:
            proc = subprocess.run(
                [sys.executable, script_name],
                cwd=sandbox, env=env, capture_output=True, text=True,
                timeout=timeout_s)
        except subprocess.TimeoutExpired as exc:
            raise TimeoutExceeded(
                f"script exceeded {timeout_s:g} s wall-clock budget") from exc
        wall_s = time.monotonic() - started

        if proc.returncode != 0:
            stderr = proc.stderr.strip() \
                or f"exit status {proc.returncode} with empty stderr"
            raise RuntimeFailure(stderr)

        artifacts = sorted((sandbox / "models").glob("*.tflite"))
        artifact = artifacts[0] if artifacts else None
        return RunResult(
            metric_name=_metric_name(
                script_path.read_text(encoding="utf-8")),
            metric_value=_parse_metric(proc.stdout),
            artifact_bytes=artifact.stat().st_size if artifact else 0,
            artifact_path=str(artifact) if artifact else None,
            wall_s=wall_s,
            stdout=proc.stdout,
            stderr=proc.stderr,
        )


def compare_profile(run: RunResult, profile: dict) -> dict:
    """Measured artifact size vs. the analytical flash estimate for the
    same quantization mode. Informational only — never a verdict."""
    flash = int(profile["flash_bytes"])
    if run.artifact_bytes <= 0:
        return {"status": "no artifact", "artifact_bytes": 0,
                "estimated_flash_bytes": flash, "ratio": None}
    ratio = run.artifact_bytes / flash
    lo, hi = CONSISTENT_RATIO_RANGE
    status = "consistent" if lo <= ratio <= hi else "discrepant"
    return {"status": status, "artifact_bytes": run.artifact_bytes,
            "estimated_flash_bytes": flash, "ratio": round(ratio, 4)}
