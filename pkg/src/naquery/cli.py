"""Command-line surface: query (full pipeline), profile, rewrite, render.

Options may come from a TOML config file (``--config``); explicit flags
override file values, and the API token can always be supplied through the
NAQUERY_API_KEY environment variable.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import jsonschema

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import agents, querygen
from .archir import ArchitectureIR, validate
from .backends import MockBackend, OpenAICompatibleBackend
from .dataset import load_dataset, representative_series
from .errors import NaqueryError
from .profiler import check_constraints, lookup_device, profile
from .querygen import render_group_image, serialize_numeric


def _report_schema() -> dict:
    from importlib import resources
    text = resources.files("naquery.assets").joinpath(
        "report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_report(report: dict) -> None:
    jsonschema.validate(report, _report_schema())


def _make_backend(backend: str, mock_fixture: str | None,
                  base_url: str | None, model: str | None):
    if backend == "mock":
        if not mock_fixture:
            raise click.UsageError("--backend mock requires --mock-fixture")
        return MockBackend(fixture_path=mock_fixture)
    if not base_url or not model:
        raise click.UsageError(
            "--backend openai-compatible requires --base-url and --model")
    return OpenAICompatibleBackend(base_url=base_url, model=model)


def _read_prompt(prompt: str | None, prompt_file: str | None) -> str:
    if (prompt is None) == (prompt_file is None):
        raise click.UsageError(
            "exactly one of --prompt / --prompt-file is required")
    if prompt is not None:
        return prompt
    return Path(prompt_file).read_text(encoding="utf-8").strip()


@click.group()
@click.option("--config", "config_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="TOML file with per-command option defaults.")
@click.pass_context
def main(ctx, config_path):
    """Query-driven tiny-model design for time-series tasks."""
    if config_path:
        with open(config_path, "rb") as fh:
            ctx.default_map = tomllib.load(fh)


_backend_options = [
    click.option("--backend", type=click.Choice(["openai-compatible",
                                                 "mock"]),
                 default="mock", show_default=True),
    click.option("--mock-fixture", type=click.Path(exists=True),
                 default=None),
    click.option("--base-url", default=None,
                 help="Chat-completions endpoint base URL."),
    click.option("--model", default=None, help="Model identifier."),
]


def _apply(options):
    def wrap(fn):
        for opt in reversed(options):
            fn = opt(fn)
        return fn
    return wrap


@main.command("query")
@click.option("--data", "data_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--name", "dataset_name", required=True)
@click.option("--prompt", default=None)
@click.option("--prompt-file", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--device", default="default", show_default=True)
@click.option("--ram", type=int, default=None, help="RAM limit in bytes.")
@click.option("--flash", type=int, default=None,
              help="Flash limit in bytes.")
@click.option("--latency-ms", type=float, default=None)
@click.option("--budget", type=int, default=agents.DEFAULT_BUDGET,
              show_default=True)
@click.option("--candidates", type=int, default=agents.DEFAULT_CANDIDATES,
              show_default=True)
@_apply(_backend_options)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--no-rewrite", is_flag=True, default=False)
@click.option("--agents", "agents_csv", default=",".join(agents.ALL_AGENTS),
              show_default=True,
              help="Comma-separated subset of design,search,eval,code.")
@click.option("--quant", type=click.Choice(["int8", "float32"]),
              default="int8", show_default=True)
@click.option("--fold-bn", is_flag=True, default=False)
@click.option("--images-all-stages", is_flag=True, default=False)
@click.option("--code-agent-writes", is_flag=True, default=False)
@click.option("--manager-verify", is_flag=True, default=False)
def cmd_query(data_dir, dataset_name, prompt, prompt_file, device, ram,
              flash, latency_ms, budget, candidates, backend, mock_fixture,
              base_url, model, seed, out_dir, no_rewrite, agents_csv, quant,
              fold_bn, images_all_stages, code_agent_writes, manager_verify):
    """Run the full pipeline and write a run directory."""
    user_prompt = _read_prompt(prompt, prompt_file)
    agent_set = tuple(a.strip() for a in agents_csv.split(",") if a.strip())
    try:
        config = agents.RunConfig(
            data_dir=data_dir, dataset_name=dataset_name,
            user_prompt=user_prompt,
            backend=_make_backend(backend, mock_fixture, base_url, model),
            out_dir=out_dir, device_name=device, ram=ram, flash=flash,
            latency_ms=latency_ms, budget=budget, candidates=candidates,
            seed=seed, quant=quant, fold_bn=fold_bn, no_rewrite=no_rewrite,
            agents=agent_set, images_all_stages=images_all_stages,
            code_agent_writes=code_agent_writes,
            manager_verify=manager_verify)
        report = agents.run_pipeline(config)
        validate_report(report)
    except (NaqueryError, ValueError) as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    selected = report["selected"]
    if selected is not None:
        tag = " (best effort)" if report["best_effort"] else ""
        click.echo(f"selected {selected['id']}{tag}; "
                   f"script: {report['script']}")
    else:
        click.echo(f"no architecture selected; script: {report['script']}")
    click.echo(f"report: {Path(out_dir) / 'report.json'}")


@main.command("profile")
@click.option("--arch", "arch_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON file with layers/input_shape/output_units/task.")
@click.option("--device", default="default", show_default=True)
@click.option("--ram", default="", help="RAM limit in bytes.")
@click.option("--flash", default="", help="Flash limit in bytes.")
@click.option("--latency-ms", "latency", default="")
@click.option("--mac", default="", help="MAC-count limit.")
@click.option("--quant", type=click.Choice(["int8", "float32"]),
              default="int8", show_default=True)
@click.option("--fold-bn", is_flag=True, default=False)
def cmd_profile(arch_path, device, ram, flash, latency, mac, quant, fold_bn):
    """Print the complexity report and feasibility verdict for one
    architecture."""
    try:
        arch = ArchitectureIR.from_dict(
            json.loads(Path(arch_path).read_text(encoding="utf-8")))
        violations = validate(arch)
        if violations:
            raise click.ClickException(
                "invalid architecture: " + "; ".join(violations))
        dev = lookup_device(device)
        report = profile(arch, dev, quant=quant, fold_bn=fold_bn)
        aspect = querygen.ModelAspect(ram=ram, flash=flash, latency=latency,
                                      mac=mac)
        verdict = check_constraints(report, aspect, dev)
    except NaqueryError as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps({"device": dev.name,
                           "profile": report.to_dict(),
                           "verdict": verdict.to_dict()},
                          indent=2, sort_keys=True))
    if not verdict.feasible:
        sys.exit(2)


@main.command("rewrite")
@click.option("--data", "data_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--name", "dataset_name", required=True)
@click.option("--prompt", default=None)
@click.option("--prompt-file", type=click.Path(exists=True, dir_okay=False),
              default=None)
@_apply(_backend_options)
def cmd_rewrite(data_dir, dataset_name, prompt, prompt_file, backend,
                mock_fixture, base_url, model):
    """Print the organized two-part query for a prompt + dataset."""
    user_prompt = _read_prompt(prompt, prompt_file)
    try:
        ds = load_dataset(data_dir, dataset_name)
        reps = representative_series(ds)
        numeric_csv = serialize_numeric(reps)
        images = [(rep.group_label, render_group_image(rep))
                  for rep in reps]
        state = agents.SearchState(query=None)
        rewritten = agents.run_rewrite_stage(
            _make_backend(backend, mock_fixture, base_url, model),
            state, user_prompt, ds, numeric_csv, images)
    except NaqueryError as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps({
        "task_description": rewritten.task_description,
        "data_aspects": rewritten.data.to_dict(),
        "model_aspects": rewritten.model.to_dict(),
    }, indent=2, sort_keys=True))


@main.command("render")
@click.option("--data", "data_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--name", "dataset_name", required=True)
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--n-bins", type=int, default=4, show_default=True,
              help="Label bins for regression datasets.")
def cmd_render(data_dir, dataset_name, out_dir, n_bins):
    """Write one summary chart image per label group."""
    try:
        ds = load_dataset(data_dir, dataset_name)
        reps = representative_series(ds, n_bins=n_bins)
    except NaqueryError as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for rep in reps:
        path = out / f"{agents._safe_name(rep.group_label)}.png"
        path.write_bytes(render_group_image(rep))
        click.echo(str(path))


if __name__ == "__main__":
    main()
