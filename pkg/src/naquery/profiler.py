"""Analytical model-complexity engine.

Closed-form parameter and MAC counts per layer, quantized flash and
ping-pong-arena RAM estimates, a clock-rate latency/energy surrogate, and
feasibility verdicts against user limits or a shipped device table. All
pure functions; safe to profile many candidates concurrently.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources

from .archir import ArchitectureIR, infer_shapes
from .querygen import ModelAspect

logger = logging.getLogger(__name__)

DEFAULT_FLASH_OVERHEAD = 2048  # graph metadata bytes added to parameter bytes
DEFAULT_MACS_PER_CYCLE = 0.5
DEFAULT_JOULES_PER_MAC = 1e-10

QUANT_WIDTHS = {"int8": 1, "float32": 4}


@dataclass(frozen=True)
class DeviceSpec:
    name: str
    clock_hz: int
    flash_bytes: int
    ram_bytes: int
    macs_per_cycle: float = DEFAULT_MACS_PER_CYCLE
    joules_per_mac: float = DEFAULT_JOULES_PER_MAC

    def __post_init__(self):
        for f in ("clock_hz", "flash_bytes", "ram_bytes", "macs_per_cycle",
                  "joules_per_mac"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be positive")


@dataclass(frozen=True)
class LayerProfile:
    index: int
    kind: str
    params: int
    macs: int
    out_shape: tuple[int, int]


@dataclass(frozen=True)
class ProfileReport:
    total_params: int
    total_macs: int
    flash_bytes: int
    peak_ram_bytes: int
    latency_ms: float
    energy_j: float
    per_layer: tuple[LayerProfile, ...]
    quant: str = "int8"

    def to_dict(self) -> dict:
        return {
            "total_params": self.total_params,
            "total_macs": self.total_macs,
            "flash_bytes": self.flash_bytes,
            "peak_ram_bytes": self.peak_ram_bytes,
            "latency_ms": self.latency_ms,
            "energy_j": self.energy_j,
            "quant": self.quant,
            "per_layer": [
                {"index": l.index, "kind": l.kind, "params": l.params,
                 "macs": l.macs, "out_shape": list(l.out_shape)}
                for l in self.per_layer
            ],
        }


@dataclass(frozen=True)
class ConstraintVerdict:
    feasible: bool
    violations: tuple[tuple[str, float, float], ...]  # (metric, limit, actual)

    def __post_init__(self):
        assert self.feasible == (len(self.violations) == 0)

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "violations": [
                {"metric": m, "limit": lim, "actual": act}
                for m, lim, act in self.violations
            ],
        }


def _layer_params(layer, c_in: int, fold_bn: bool) -> int:
    k = layer.kernel_size or 0
    if layer.kind == "Conv1D":
        return (k * c_in + 1) * layer.filters
    if layer.kind == "DepthwiseConv1D":
        return k * c_in + c_in
    if layer.kind == "SeparableConv1D":
        # bias on the pointwise stage only
        return k * c_in + c_in * layer.filters + layer.filters
    if layer.kind == "Dense":
        return c_in * layer.units + layer.units
    if layer.kind == "LSTM":
        return 4 * layer.units * (c_in + layer.units + 1)
    if layer.kind == "BatchNorm":
        return 0 if fold_bn else 4 * c_in
    return 0  # pools, Dropout, Flatten


def _layer_macs(layer, in_len: int, c_in: int, out_len: int,
                fold_bn: bool) -> int:
    k = layer.kernel_size or 0
    if layer.kind == "Conv1D":
        return out_len * layer.filters * k * c_in
    if layer.kind == "DepthwiseConv1D":
        return out_len * c_in * k
    if layer.kind == "SeparableConv1D":
        return out_len * c_in * k + out_len * c_in * layer.filters
    if layer.kind == "Dense":
        return in_len * c_in * layer.units
    if layer.kind == "LSTM":
        return in_len * 4 * layer.units * (c_in + layer.units)
    if layer.kind == "BatchNorm":
        return 0 if fold_bn else out_len * c_in
    return 0


def _walk(arch: ArchitectureIR, fold_bn: bool) -> list[LayerProfile]:
    shapes = infer_shapes(arch)
    profiles = []
    in_len, c_in = arch.input_shape
    for (idx, out_shape), layer in zip(shapes, arch.layers):
        # Dense consumes the flattened (length * channels) input
        dense_in = in_len * c_in if layer.kind == "Dense" else c_in
        params = _layer_params(layer, dense_in, fold_bn)
        macs = _layer_macs(
            layer, 1 if layer.kind == "Dense" else in_len, dense_in,
            out_shape[0], fold_bn)
        profiles.append(LayerProfile(index=idx, kind=layer.kind,
                                     params=params, macs=macs,
                                     out_shape=out_shape))
        in_len, c_in = out_shape
    return profiles


def count_params(arch: ArchitectureIR, fold_bn: bool = False):
    """Per-layer and total parameter counts for a validated architecture."""
    per_layer = _walk(arch, fold_bn)
    return per_layer, sum(l.params for l in per_layer)


def count_macs(arch: ArchitectureIR, fold_bn: bool = False):
    """Per-layer and total multiply-accumulate counts."""
    per_layer = _walk(arch, fold_bn)
    return per_layer, sum(l.macs for l in per_layer)


def estimate_flash(params: int, quant: str = "int8",
                   overhead: int = DEFAULT_FLASH_OVERHEAD) -> int:
    """Quantized parameter bytes plus fixed graph-metadata overhead."""
    return params * QUANT_WIDTHS[quant] + overhead


def estimate_peak_ram(arch: ArchitectureIR, quant: str = "int8") -> int:
    """Ping-pong arena model: the worst layer's input + output activation
    bytes, with LSTM cell/hidden state buffers added on its layer."""
    width = QUANT_WIDTHS[quant]
    in_len, c_in = arch.input_shape
    if not arch.layers:
        return 2 * in_len * c_in * width
    peak = 0
    for (idx, out_shape), layer in zip(infer_shapes(arch), arch.layers):
        in_bytes = in_len * c_in * width
        out_bytes = out_shape[0] * out_shape[1] * width
        need = in_bytes + out_bytes
        if layer.kind == "LSTM":
            need += 2 * layer.units * width
        peak = max(peak, need)
        in_len, c_in = out_shape
    return peak


def estimate_latency_energy(macs: int, dev: DeviceSpec):
    """(latency_ms, energy_j) from the MAC total and the device's
    throughput and per-MAC energy figures. A declared estimate, not a
    cycle-accurate simulation."""
    latency_ms = macs / (dev.clock_hz * dev.macs_per_cycle) * 1000.0
    return latency_ms, macs * dev.joules_per_mac


def profile(arch: ArchitectureIR, dev: DeviceSpec, quant: str = "int8",
            fold_bn: bool = False,
            flash_overhead: int = DEFAULT_FLASH_OVERHEAD) -> ProfileReport:
    """Full complexity report for one architecture."""
    per_layer = _walk(arch, fold_bn)
    total_params = sum(l.params for l in per_layer)
    total_macs = sum(l.macs for l in per_layer)
    latency_ms, energy_j = estimate_latency_energy(total_macs, dev)
    return ProfileReport(
        total_params=total_params,
        total_macs=total_macs,
        flash_bytes=estimate_flash(total_params, quant, flash_overhead),
        peak_ram_bytes=estimate_peak_ram(arch, quant),
        latency_ms=latency_ms,
        energy_j=energy_j,
        per_layer=tuple(per_layer),
        quant=quant,
    )


def _parse_limit(value: str) -> float | None:
    if value is None:
        return None
    text = str(value).strip()
    if not text:
        return None
    try:
        return float(text)
    except ValueError:
        return None  # prose like "limited by RAM" carries no numeric bound


def check_constraints(report: ProfileReport, model_aspect: ModelAspect,
                      dev: DeviceSpec) -> ConstraintVerdict:
    """Deterministic feasibility verdict.

    Empty (or non-numeric) ram/flash limits fall back to the device's
    memory sizes; MAC and latency default to unlimited.
    """
    ram_limit = _parse_limit(model_aspect.ram)
    flash_limit = _parse_limit(model_aspect.flash)
    checks = [
        ("ram", ram_limit if ram_limit is not None else dev.ram_bytes,
         report.peak_ram_bytes),
        ("flash", flash_limit if flash_limit is not None else dev.flash_bytes,
         report.flash_bytes),
        ("mac", _parse_limit(model_aspect.mac), report.total_macs),
        ("latency_ms", _parse_limit(model_aspect.latency), report.latency_ms),
    ]
    violations = tuple((metric, float(limit), float(actual))
                       for metric, limit, actual in checks
                       if limit is not None and actual > limit)
    return ConstraintVerdict(feasible=not violations, violations=violations)


def _device_table() -> dict:
    text = resources.files("naquery.assets").joinpath(
        "devices.json").read_text(encoding="utf-8")
    return json.loads(text)


def _canon(name: str) -> str:
    return re.sub(r"[^a-z0-9]", "", name.lower())


def lookup_device(name: str) -> DeviceSpec:
    """Case-insensitive fuzzy lookup; unknown names fall back to the
    generic default with a logged warning."""
    table = _device_table()
    wanted = _canon(name)
    if wanted:
        for key, spec in table.items():
            ck = _canon(key)
            if ck == wanted or (ck != "default"
                                and (ck in wanted or wanted in ck)):
                return DeviceSpec(name=key, **spec)
    logger.warning("unknown device %r, using generic default", name)
    return DeviceSpec(name="default", **table["default"])
