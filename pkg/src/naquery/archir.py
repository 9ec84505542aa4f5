"""Neural-architecture intermediate representation.

Ordered layer list with hyperparameters, shape inference over the
(length, channels) time-series axis pair, structural validation, and the
parsers that turn chat-response blocks into SearchSpace / ArchitectureIR
values. This is the shared language between the search loop, the
complexity profiler, and script emission.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

from .errors import (EmptySpaceDimension, NoSpaceFound, SchemaViolation,
                     ShapeUnderflow)
from .textparse import extract_fenced_blocks, loads_object

CONV_KINDS = ("Conv1D", "DepthwiseConv1D", "SeparableConv1D")
POOL_KINDS = ("MaxPool1D", "AvgPool1D")
TIME_AXIS_KINDS = CONV_KINDS + POOL_KINDS + ("LSTM", "GlobalAvgPool1D")
LAYER_KINDS = CONV_KINDS + POOL_KINDS + (
    "LSTM", "Dense", "GlobalAvgPool1D", "BatchNorm", "Dropout", "Flatten")

ACTIVATIONS = ("none", "relu", "tanh", "sigmoid", "softmax", "linear")

_KIND_ALIASES = {
    "conv1d": "Conv1D",
    "depthwiseconv1d": "DepthwiseConv1D",
    "separableconv1d": "SeparableConv1D",
    "lstm": "LSTM",
    "dense": "Dense",
    "maxpool1d": "MaxPool1D",
    "maxpooling1d": "MaxPool1D",
    "avgpool1d": "AvgPool1D",
    "averagepooling1d": "AvgPool1D",
    "globalavgpool1d": "GlobalAvgPool1D",
    "globalaveragepooling1d": "GlobalAvgPool1D",
    "batchnorm": "BatchNorm",
    "batchnormalization": "BatchNorm",
    "dropout": "Dropout",
    "flatten": "Flatten",
}

SPACE_DIMENSIONS = (
    "layer_type",
    "Conv1D_kernel_size", "Conv1D_filters",
    "DepthwiseConv1D_kernel_size",
    "SeparableConv1D_kernel_size", "SeparableConv1D_filters",
    "LSTM_units", "Dense_units",
    "activation", "dropout_rate",
    "pooling_type", "pool_size", "strides",
    "batch_normalization",
)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    filters: int | None = None
    units: int | None = None
    kernel_size: int | None = None
    strides: int = 1
    padding: str = "valid"
    activation: str = "none"
    rate: float | None = None
    return_sequences: bool | None = None

    def structural_violations(self) -> list[str]:
        v = []
        if self.kind not in LAYER_KINDS:
            return [f"unknown layer kind {self.kind!r}"]
        need_kernel = self.kind in CONV_KINDS + POOL_KINDS
        if need_kernel and not (self.kernel_size and self.kernel_size >= 1):
            v.append(f"{self.kind} needs a positive kernel_size")
        if self.kind in ("Conv1D", "SeparableConv1D") and not (
                self.filters and self.filters >= 1):
            v.append(f"{self.kind} needs positive filters")
        if self.kind in ("Dense", "LSTM") and not (self.units and self.units >= 1):
            v.append(f"{self.kind} needs positive units")
        if self.kind == "Dropout" and self.rate is None:
            v.append("Dropout needs a rate")
        if self.rate is not None and not 0.0 <= self.rate <= 1.0:
            v.append(f"rate {self.rate} outside [0, 1]")
        if self.strides < 1:
            v.append(f"strides must be positive, got {self.strides}")
        if self.padding not in ("valid", "same"):
            v.append(f"unknown padding {self.padding!r}")
        if self.activation not in ACTIVATIONS:
            v.append(f"unknown activation {self.activation!r}")
        return v

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for key in ("filters", "units", "kernel_size", "rate",
                    "return_sequences"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        out["strides"] = self.strides
        out["padding"] = self.padding
        out["activation"] = self.activation
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "LayerSpec":
        return cls(
            kind=obj["kind"],
            filters=obj.get("filters"),
            units=obj.get("units"),
            kernel_size=obj.get("kernel_size"),
            strides=int(obj.get("strides", 1)),
            padding=obj.get("padding", "valid"),
            activation=obj.get("activation", "none"),
            rate=obj.get("rate"),
            return_sequences=obj.get("return_sequences"),
        )


@dataclass(frozen=True)
class ArchitectureIR:
    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, int]  # (T, d)
    output_units: int
    task: str

    @property
    def id(self) -> str:
        return self.content_hash()

    def content_hash(self) -> str:
        canon = self.to_json()
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "layers": [layer.to_dict() for layer in self.layers],
            "input_shape": list(self.input_shape),
            "output_units": self.output_units,
            "task": self.task,
        }

    def to_json(self) -> str:
        # canonical form: sorted keys so the content hash is stable
        return json.dumps(self.to_dict(), sort_keys=True,
                          separators=(",", ":"))

    @classmethod
    def from_dict(cls, obj: dict) -> "ArchitectureIR":
        return cls(
            layers=tuple(LayerSpec.from_dict(l) for l in obj["layers"]),
            input_shape=tuple(obj["input_shape"]),
            output_units=int(obj["output_units"]),
            task=obj["task"],
        )


def infer_shapes(arch: ArchitectureIR) -> list[tuple[int, tuple[int, int]]]:
    """Output (length, channels) after each layer.

    Raises ShapeUnderflow when a valid-padding window no longer fits.
    """
    length, channels = arch.input_shape
    out = []
    for idx, layer in enumerate(arch.layers):
        kind = layer.kind
        if kind in CONV_KINDS + POOL_KINDS:
            k, s = layer.kernel_size, layer.strides
            if layer.padding == "same":
                length = math.ceil(length / s)
            else:
                if k > length:
                    raise ShapeUnderflow(
                        idx, f"layer {idx} ({kind}): kernel {k} exceeds "
                             f"input length {length}")
                length = (length - k) // s + 1
            if kind in ("Conv1D", "SeparableConv1D"):
                channels = layer.filters
        elif kind == "GlobalAvgPool1D":
            length = 1
        elif kind == "Flatten":
            length, channels = 1, length * channels
        elif kind == "Dense":
            length, channels = 1, layer.units
        elif kind == "LSTM":
            if not layer.return_sequences:
                length = 1
            channels = layer.units
        # BatchNorm / Dropout leave the shape unchanged
        if length < 1:
            raise ShapeUnderflow(idx, f"layer {idx} ({kind}): empty output")
        out.append((idx, (length, channels)))
    return out


def validate(arch: ArchitectureIR) -> list[str]:
    """Structural + shape + head checks. Returns violations, never raises."""
    violations = []
    for idx, layer in enumerate(arch.layers):
        violations.extend(f"layer {idx}: {v}"
                          for v in layer.structural_violations())
    if arch.input_shape[0] < 1 or arch.input_shape[1] < 1:
        violations.append("input shape must have T >= 1 and d >= 1")
    if arch.output_units < 1:
        violations.append("output_units must be positive")
    if not arch.layers:
        violations.append("empty layer list")
    if violations:
        return violations

    try:
        infer_shapes(arch)
    except ShapeUnderflow as exc:
        violations.append(f"shape underflow: {exc}")

    collapsed = False
    seen_final_lstm = False
    for idx, layer in enumerate(arch.layers):
        if collapsed and layer.kind in TIME_AXIS_KINDS:
            violations.append(
                f"layer {idx} ({layer.kind}): time axis consumed by an "
                f"earlier layer")
        if layer.kind == "LSTM" and not layer.return_sequences:
            if seen_final_lstm:
                violations.append(
                    f"layer {idx}: more than one non-return_sequences LSTM")
            seen_final_lstm = True
        if layer.kind in ("Dense", "Flatten", "GlobalAvgPool1D") or (
                layer.kind == "LSTM" and not layer.return_sequences):
            collapsed = True

    head = arch.layers[-1]
    expected = "softmax" if arch.task == "classification" else "linear"
    if head.kind != "Dense":
        violations.append(f"head activation: last layer must be Dense, "
                          f"got {head.kind}")
    else:
        if head.units != arch.output_units:
            violations.append(f"head units {head.units} != output_units "
                              f"{arch.output_units}")
        if head.activation != expected:
            violations.append(f"head activation must be {expected} for "
                              f"{arch.task}, got {head.activation}")
    return violations


@dataclass
class SearchSpace:
    dimensions: dict[str, list] = field(default_factory=dict)
    extras: dict[str, list] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"dimensions": self.dimensions, "extras": self.extras,
                "warnings": self.warnings}


def parse_search_space(llm_text: str) -> SearchSpace:
    """Pull the search-space dictionary out of a design-agent response.

    Known dimension names go to `dimensions`; unknown keys are kept in
    `extras` with a warning rather than rejected.
    """
    try:
        obj = loads_object(llm_text)
    except Exception:
        raise NoSpaceFound("no parsable search-space block in response")
    space = SearchSpace()
    for key, value in obj.items():
        values = value if isinstance(value, list) else [value]
        if not values:
            raise EmptySpaceDimension(f"dimension {key!r} has no values")
        if key in SPACE_DIMENSIONS:
            space.dimensions[key] = values
        else:
            space.extras[key] = values
            space.warnings.append(f"unknown search-space key {key!r} kept "
                                  f"as extra")
    if not space.dimensions:
        raise NoSpaceFound("no known search-space dimensions in response")
    return space


def default_search_space() -> SearchSpace:
    """Fallback space when the design stage fails."""
    return SearchSpace(dimensions={
        "layer_type": ["Conv1D", "DepthwiseConv1D", "SeparableConv1D",
                       "LSTM", "Dense"],
        "Conv1D_kernel_size": [3, 5],
        "Conv1D_filters": [8, 16],
        "DepthwiseConv1D_kernel_size": [3, 5],
        "SeparableConv1D_kernel_size": [3, 5],
        "SeparableConv1D_filters": [8, 16],
        "LSTM_units": [16, 32],
        "Dense_units": [32, 64],
        "activation": ["relu", "tanh"],
        "dropout_rate": [0.0, 0.2],
        "pooling_type": ["max", "average"],
        "pool_size": [2, 3],
        "strides": [1, 2],
        "batch_normalization": [True, False],
    })


def _normalize_activation(value) -> str:
    if value is None:
        return "none"
    act = str(value).lower()
    return act if act in ACTIVATIONS else "none"


def _entry_to_layers(entry: dict) -> list[LayerSpec]:
    """One candidate-config entry to IR layers.

    Pooling descriptors ({"pooling_type": ...}) become pool layers with
    framework-default strides (= pool size); a batch_normalization flag on
    a layer entry appends a BatchNorm layer after it.
    """
    if "pooling_type" in entry and "layer_type" not in entry:
        pool = str(entry["pooling_type"]).lower()
        kind = "MaxPool1D" if pool.startswith("max") else "AvgPool1D"
        size = int(entry.get("pool_size", 2))
        return [LayerSpec(kind=kind, kernel_size=size,
                          strides=int(entry.get("strides", size)))]
    raw_kind = str(entry.get("layer_type", ""))
    kind = _KIND_ALIASES.get(raw_kind.lower().replace("_", ""))
    if kind is None:
        raise SchemaViolation(f"unknown layer_type {raw_kind!r}")
    rate = entry.get("dropout_rate", entry.get("rate"))
    spec = LayerSpec(
        kind=kind,
        filters=int(entry["filters"]) if "filters" in entry else None,
        units=int(entry["units"]) if "units" in entry else None,
        kernel_size=(int(entry["kernel_size"]) if "kernel_size" in entry
                     else int(entry["pool_size"]) if "pool_size" in entry
                     else None),
        strides=int(entry.get("strides", 1)),
        padding=str(entry.get("padding", "valid")).lower(),
        activation=_normalize_activation(entry.get("activation")),
        rate=float(rate) if rate is not None else None,
        return_sequences=(bool(entry["return_sequences"])
                          if "return_sequences" in entry
                          else False if kind == "LSTM" else None),
    )
    if kind == "Dropout" and spec.rate is None:
        spec = replace(spec, rate=0.0)
    layers = [spec]
    if entry.get("batch_normalization"):
        layers.append(LayerSpec(kind="BatchNorm"))
    return layers


def parse_candidate_config(block, input_shape: tuple[int, int],
                           output_units: int, task: str) -> ArchitectureIR:
    """Build an ArchitectureIR from a search-agent config block.

    `block` is either the text of one fenced block or an already-parsed
    dict with a "layer_sequence" list (a bare list also works).
    """
    if isinstance(block, str):
        obj = loads_object(block)
    else:
        obj = block
    if isinstance(obj, dict):
        seq = obj.get("layer_sequence", obj.get("layers"))
    else:
        seq = obj
    if not isinstance(seq, list) or not seq:
        raise SchemaViolation("candidate config has no layer_sequence list")
    layers: list[LayerSpec] = []
    for entry in seq:
        if not isinstance(entry, dict):
            raise SchemaViolation(f"layer entry must be an object, "
                                  f"got {type(entry).__name__}")
        layers.extend(_entry_to_layers(entry))
    return ArchitectureIR(layers=tuple(layers), input_shape=input_shape,
                          output_units=output_units, task=task)


def parse_candidate_configs(llm_text: str, input_shape: tuple[int, int],
                            output_units: int, task: str):
    """All parseable candidate configs from a search response, plus the
    rejection reasons for blocks that failed."""
    parsed, rejected = [], []
    for i, block in enumerate(extract_fenced_blocks(llm_text)):
        if "layer_sequence" not in block and "layers" not in block:
            continue
        try:
            parsed.append(parse_candidate_config(
                block, input_shape, output_units, task))
        except Exception as exc:
            rejected.append(f"block {i}: {exc}")
    return parsed, rejected
