"""Multimodal query construction: csv text, chart images, and the
two-part rewritten query (data aspect + modeling aspect)."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from importlib import resources

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .dataset import RepresentativeSeries, TimeSeriesDataset
from .errors import RenderFailure, SchemaViolation
from .textparse import loads_object

DEFAULT_FIXED_LENGTH = 128
SUBPLOT_WIDTH_PX = 640
SUBPLOT_HEIGHT_PX = 240

DATA_ASPECT_KEYS = ("name", "description", "features", "context", "patterns")
MODEL_ASPECT_KEYS = ("name", "hardware_specs", "MAC", "parameters",
                     "latency", "performance")
HARDWARE_KEYS = ("device_name", "ram", "flash")


def _check_keys(obj: dict, expected, where: str) -> None:
    missing = [k for k in expected if k not in obj]
    extra = [k for k in obj if k not in expected]
    if missing or extra:
        raise SchemaViolation(
            f"{where}: missing keys {missing}, extra keys {extra}",
            missing=missing, extra=extra)


def _check_byte_field(value: str, where: str) -> None:
    if value == "":
        return
    try:
        n = int(str(value).strip())
    except ValueError:
        raise SchemaViolation(f"{where} must be bytes as integer, got {value!r}")
    if n < 0:
        raise SchemaViolation(f"{where} must be non-negative, got {n}")


@dataclass(frozen=True)
class DataAspect:
    name: str = ""
    description: str = ""
    features: str = ""
    context: str = ""
    patterns: str = ""

    @classmethod
    def from_dict(cls, obj: dict) -> "DataAspect":
        _check_keys(obj, DATA_ASPECT_KEYS, "data_aspects")
        return cls(**{k: str(obj[k]) for k in DATA_ASPECT_KEYS})

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in DATA_ASPECT_KEYS}


@dataclass(frozen=True)
class ModelAspect:
    name: str = ""
    device_name: str = ""
    ram: str = ""    # bytes as string, may be empty
    flash: str = ""  # bytes as string, may be empty
    mac: str = ""
    parameters: str = ""
    latency: str = ""  # milliseconds
    performance: str = ""

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelAspect":
        _check_keys(obj, MODEL_ASPECT_KEYS, "model_aspects")
        hw = obj["hardware_specs"]
        if not isinstance(hw, dict):
            raise SchemaViolation("hardware_specs must be an object")
        _check_keys(hw, HARDWARE_KEYS, "hardware_specs")
        _check_byte_field(hw["ram"], "hardware_specs.ram")
        _check_byte_field(hw["flash"], "hardware_specs.flash")
        return cls(
            name=str(obj["name"]),
            device_name=str(hw["device_name"]),
            ram=str(hw["ram"]),
            flash=str(hw["flash"]),
            mac=str(obj["MAC"]),
            parameters=str(obj["parameters"]),
            latency=str(obj["latency"]),
            performance=str(obj["performance"]),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "hardware_specs": {
                "device_name": self.device_name,
                "ram": self.ram,
                "flash": self.flash,
            },
            "MAC": self.mac,
            "parameters": self.parameters,
            "latency": self.latency,
            "performance": self.performance,
        }


@dataclass(frozen=True)
class RewrittenQuery:
    """The parsed two-part rewrite: what parse_rewritten_query returns."""

    task_description: str
    data: DataAspect
    model: ModelAspect


@dataclass
class MultiObjectiveQuery:
    task_description: str
    data: DataAspect
    model: ModelAspect
    numeric_csv: str
    images: list[tuple[str, bytes]] = field(default_factory=list)
    raw_user_prompt: str = ""

    def to_dict(self) -> dict:
        return {
            "task_description": self.task_description,
            "data_aspects": self.data.to_dict(),
            "model_aspects": self.model.to_dict(),
        }


def _column_label(group_label: str, feature: int) -> str:
    safe = group_label.replace(", ", "-").replace(",", "-").replace(" ", "_")
    return f"{safe}_f{feature}"


def serialize_numeric(reps: list[RepresentativeSeries],
                      fixed_length: int = DEFAULT_FIXED_LENGTH) -> str:
    """Fixed-length csv of the group means, segment-mean pooled when T
    exceeds the limit. Values rounded to 4 decimals."""
    if fixed_length < 1:
        raise ValueError("fixed_length must be >= 1")
    t_len = reps[0].mean.shape[0]
    n_rows = min(t_len, fixed_length)
    pooled = []
    for rep in reps:
        if t_len <= fixed_length:
            pooled.append(rep.mean)
        else:
            segments = np.array_split(np.arange(t_len), fixed_length)
            pooled.append(np.stack([rep.mean[idx].mean(axis=0)
                                    for idx in segments]))
    header = ["timestamp"]
    for rep, values in zip(reps, pooled):
        header.extend(_column_label(rep.group_label, f)
                      for f in range(values.shape[1]))
    lines = [",".join(header)]
    for i in range(n_rows):
        row = [str(i)]
        for values in pooled:
            row.extend(f"{round(float(v), 4):g}" for v in values[i])
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def render_group_image(rep: RepresentativeSeries,
                       subplot_width_px: int = SUBPLOT_WIDTH_PX,
                       subplot_height_px: int = SUBPLOT_HEIGHT_PX) -> bytes:
    """One vertically stacked line chart per feature: solid mean line with
    a mean +/- 1 std band. Deterministic png bytes for equal inputs."""
    if subplot_width_px < 1 or subplot_height_px < 1:
        raise RenderFailure("zero-dimension canvas")
    t_len, d = rep.mean.shape
    dpi = 100
    fig, axes = plt.subplots(
        d, 1, sharex=True, squeeze=False,
        figsize=(subplot_width_px / dpi, subplot_height_px * d / dpi),
        dpi=dpi)
    try:
        t = np.arange(t_len)
        for f in range(d):
            ax = axes[f][0]
            mean, std = rep.mean[:, f], rep.std[:, f]
            if t_len == 1:
                ax.plot(t, mean, marker="o", color="tab:blue")
            else:
                ax.plot(t, mean, color="tab:blue", linewidth=1.2)
            ax.fill_between(t, mean - std, mean + std,
                            color="tab:blue", alpha=0.25, linewidth=0)
            ax.set_ylabel(f"f{f}")
        axes[-1][0].set_xlabel("timestamp")
        fig.suptitle(rep.group_label)
        buf = io.BytesIO()
        fig.savefig(buf, format="png", metadata={"Software": None})
        return buf.getvalue()
    finally:
        plt.close(fig)


def _rewrite_template() -> str:
    return resources.files("naquery.assets.prompts").joinpath(
        "rewrite.txt").read_text(encoding="utf-8")


def build_rewrite_prompt(user_prompt: str, ds: TimeSeriesDataset,
                         numeric_csv: str) -> str:
    """The rewrite instruction with the user prompt substituted and the
    dataset context appended. Images travel separately at transport time."""
    prompt = _rewrite_template().replace("{user_prompt}", user_prompt, 1)
    description = ds.description or "(none provided)"
    if ds.feature_descriptions:
        features = "\n".join(f"- f{i}: {desc}" for i, desc
                             in enumerate(ds.feature_descriptions))
    else:
        features = "(none provided)"
    context = [
        prompt,
        "",
        "[Dataset Description]",
        description,
        "",
        "[Feature Descriptions]",
        features,
        "",
        "[Representative Numerical Time Series (csv)]",
        numeric_csv.rstrip("\n"),
        "",
    ]
    return "\n".join(context)


def parse_rewritten_query(llm_text: str) -> RewrittenQuery:
    """Lenient parse of the rewrite response, then strict key validation.

    Raises NoJsonFound or SchemaViolation; both trigger a single re-ask in
    the agent loop.
    """
    obj = loads_object(llm_text)
    _check_keys(obj, ("task_description", "data_aspects", "model_aspects"),
                "rewritten query")
    if not isinstance(obj["data_aspects"], dict):
        raise SchemaViolation("data_aspects must be an object")
    if not isinstance(obj["model_aspects"], dict):
        raise SchemaViolation("model_aspects must be an object")
    return RewrittenQuery(
        task_description=str(obj["task_description"]),
        data=DataAspect.from_dict(obj["data_aspects"]),
        model=ModelAspect.from_dict(obj["model_aspects"]),
    )


def passthrough_query(user_prompt: str) -> RewrittenQuery:
    """Mechanical query for the no-rewrite variant: raw prompt as the task
    description, both aspects left empty."""
    return RewrittenQuery(task_description=user_prompt,
                          data=DataAspect(), model=ModelAspect())
