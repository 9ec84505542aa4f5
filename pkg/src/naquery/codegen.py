"""Training-script emission and extraction.

The shipped skeleton templates are frozen except for a single get_model
placeholder region delimited by marker comments. Deterministic emission
replaces the region 1:1 from an ArchitectureIR; extraction validates that
an agent-authored script left every frozen byte untouched.
"""

from __future__ import annotations

import ast
import hashlib
from dataclasses import dataclass
from importlib import resources

from .archir import ArchitectureIR
from .errors import NoCodeFence, TemplateTampered, UnsupportedLayer
from .textparse import extract_fenced_blocks

BEGIN_MARKER = "# >>> get_model >>>\n"
END_MARKER = "# <<< get_model <<<\n"

_KERAS_NAMES = {
    "Conv1D": "Conv1D",
    "DepthwiseConv1D": "DepthwiseConv1D",
    "SeparableConv1D": "SeparableConv1D",
    "LSTM": "LSTM",
    "Dense": "Dense",
    "MaxPool1D": "MaxPooling1D",
    "AvgPool1D": "AveragePooling1D",
    "GlobalAvgPool1D": "GlobalAveragePooling1D",
    "BatchNorm": "BatchNormalization",
    "Dropout": "Dropout",
    "Flatten": "Flatten",
}


@dataclass(frozen=True)
class SkeletonTemplate:
    task: str
    prefix: str      # frozen bytes before the placeholder region
    suffix: str      # frozen bytes after it
    placeholder: str

    @property
    def text(self) -> str:
        return self.prefix + BEGIN_MARKER + self.placeholder + END_MARKER \
            + self.suffix

    @property
    def immutable_hash(self) -> str:
        return hashlib.sha256(
            (self.prefix + self.suffix).encode("utf-8")).hexdigest()

    def render(self) -> str:
        """The plain skeleton (markers removed, placeholder kept) as sent
        to a code agent."""
        return self.prefix + self.placeholder + self.suffix


def load_template(task: str) -> SkeletonTemplate:
    text = resources.files("naquery.assets.templates").joinpath(
        f"{task}.py.tmpl").read_text(encoding="utf-8")
    if text.count(BEGIN_MARKER) != 1 or text.count(END_MARKER) != 1:
        raise TemplateTampered(f"{task} template must contain exactly one "
                               f"placeholder region")
    prefix, rest = text.split(BEGIN_MARKER, 1)
    placeholder, suffix = rest.split(END_MARKER, 1)
    return SkeletonTemplate(task=task, prefix=prefix, suffix=suffix,
                            placeholder=placeholder)


def _layer_statement(layer, first: bool) -> str:
    name = _KERAS_NAMES.get(layer.kind)
    if name is None:
        raise UnsupportedLayer(f"cannot emit layer kind {layer.kind!r}")
    args = []
    if layer.kind in ("Conv1D", "SeparableConv1D"):
        args.append(f"filters={layer.filters}")
    if layer.kind in ("Dense", "LSTM"):
        args.append(f"units={layer.units}")
    if layer.kind in ("Conv1D", "DepthwiseConv1D", "SeparableConv1D"):
        args.append(f"kernel_size={layer.kernel_size}")
        args.append(f"strides={layer.strides}")
        args.append(f"padding='{layer.padding}'")
    if layer.kind in ("MaxPool1D", "AvgPool1D"):
        args.append(f"pool_size={layer.kernel_size}")
        args.append(f"strides={layer.strides}")
        args.append(f"padding='{layer.padding}'")
    if layer.activation != "none":
        args.append(f"activation='{layer.activation}'")
    if layer.kind == "LSTM":
        if layer.rate is not None:
            args.append(f"dropout={layer.rate}")
        args.append(f"return_sequences={bool(layer.return_sequences)}")
    if layer.kind == "Dropout":
        args.append(f"rate={layer.rate}")
    if first:
        args.append("input_shape=(seq_length, n_features)")
    return f"keras.layers.{name}({', '.join(args)})"


def emit_get_model(arch: ArchitectureIR) -> str:
    """The get_model block: one Sequential entry per IR layer."""
    lines = ["def get_model():", "    model = keras.Sequential(["]
    for i, layer in enumerate(arch.layers):
        lines.append(f"        {_layer_statement(layer, i == 0)},")
    lines.append("    ])")
    lines.append("    return model")
    return "\n".join(lines) + "\n"


def emit_script(arch: ArchitectureIR, template: SkeletonTemplate) -> str:
    """Deterministic script emission; frozen template bytes unchanged."""
    return template.prefix + emit_get_model(arch) + template.suffix


def extract_script(llm_text: str, template: SkeletonTemplate) -> str:
    """Pull the fenced script out of a code-agent response and verify the
    frozen regions byte-match the template."""
    blocks = extract_fenced_blocks(llm_text, lang="python")
    if not blocks:
        raise NoCodeFence("no ```python fence in response")
    script = blocks[0]
    if not script.endswith("\n"):
        script += "\n"
    if not script.startswith(template.prefix) \
            or not script.endswith(template.suffix):
        raise TemplateTampered("frozen template regions were modified")
    body = script[len(template.prefix):len(script) - len(template.suffix)]
    if "def get_model" not in body:
        raise TemplateTampered("script does not define get_model")
    frozen = hashlib.sha256(
        (template.prefix + template.suffix).encode("utf-8")).hexdigest()
    if frozen != template.immutable_hash:
        raise TemplateTampered("frozen-region hash mismatch")
    return script


def parse_emitted_layers(script: str) -> list[tuple[str, tuple]]:
    """Recover (keras layer name, sorted kwargs) tuples from an emitted
    script's get_model body. Used for the text-level round-trip check."""
    tree = ast.parse(script)
    for node in ast.walk(tree):
        if isinstance(node, ast.FunctionDef) and node.name == "get_model":
            layers = []
            for call in ast.walk(node):
                if (isinstance(call, ast.Call)
                        and isinstance(call.func, ast.Attribute)
                        and isinstance(call.func.value, ast.Attribute)
                        and call.func.value.attr == "layers"):
                    kwargs = tuple(sorted(
                        (kw.arg, ast.unparse(kw.value))
                        for kw in call.keywords
                        if kw.arg != "input_shape"))
                    layers.append((call.func.attr, kwargs))
            return layers
    return []
