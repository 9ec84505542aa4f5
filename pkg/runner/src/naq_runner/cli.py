"""Standalone command: execute the training script found in a query run
directory and record the measured outcome as run_result.json."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .errors import RunnerError
from .runner import compare_profile, execute_script


@click.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False,
                                           path_type=Path))
@click.option("--data", "data_dir", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Root directory holding one sub-directory per dataset.")
@click.option("--epochs", type=int, default=None,
              help="Override the script's epoch count (e.g. 2 for smoke "
                   "runs). Default: run the script as written.")
@click.option("--timeout", "timeout_s", type=float, default=600.0,
              show_default=True, help="Wall-clock budget in seconds.")
def main(run_dir: Path, data_dir: Path, epochs: int | None,
         timeout_s: float):
    """Train, quantize, and measure the script inside RUN_DIR.

    Reads RUN_DIR/report.json for the script filename and dataset name,
    executes the script in a sandbox under RUN_DIR/exec/, and writes
    run_result.json next to report.json. The dataset directory under
    --data must carry the dataset name recorded in the report.
    """
    report_path = run_dir / "report.json"
    if not report_path.is_file():
        raise click.ClickException(f"no report.json under {run_dir}")
    report = json.loads(report_path.read_text(encoding="utf-8"))
    script_name = report.get("script")
    if not script_name:
        raise click.ClickException("run directory has no training script")

    try:
        run = execute_script(
            run_dir / script_name, data_dir, epochs,
            dataset_name=report["config"]["dataset"],
            timeout_s=timeout_s, keep_dir=run_dir / "exec")
    except RunnerError as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")

    selected = report.get("selected")
    comparison = (compare_profile(run, selected["profile"])
                  if selected else None)
    payload = run.to_dict()
    payload["profile_comparison"] = comparison
    (run_dir / "run_result.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    click.echo(f"{run.metric_name}={run.metric_value:.4f} "
               f"artifact_bytes={run.artifact_bytes} "
               f"wall_s={run.wall_s:.1f}")
    if comparison is not None:
        click.echo(f"profile comparison: {comparison['status']} "
                   f"(ratio={comparison['ratio']})")


if __name__ == "__main__":
    main()
