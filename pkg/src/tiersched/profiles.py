"""Cost profiles: per-layer model descriptions and per-worker timing tables.

A profile holds, for every layer i and worker j, the per-sample forward and
backward times, the per-layer weight-update time, the parameter count and the
forward-output size in bytes.  Profiles are synthesized from worker rates
(there is no hardware measurement here) or loaded from a JSON document.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .errors import SchemaError, ValidationError

WORKER_IDS = ("device", "edge", "cloud")
LAYER_KINDS = ("conv", "dense", "pool", "activation")

# Activations and weights are single precision on the wire.
BYTES_PER_ELEM = 4
BYTES_PER_PARAM = 4


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a strict chain; counts are per sample."""

    index: int
    kind: str
    input_elems: int
    output_elems: int
    flops_forward: int
    param_count: int

    def __post_init__(self):
        if self.index < 1:
            raise ValidationError(f"layer index must be >= 1, got {self.index}")
        if self.kind not in LAYER_KINDS:
            raise ValidationError(f"unknown layer kind {self.kind!r}")
        for name in ("input_elems", "output_elems", "flops_forward", "param_count"):
            if getattr(self, name) < 0:
                raise ValidationError(f"layer {self.index}: {name} must be >= 0")
        if self.kind in ("conv", "dense") and self.param_count <= 0:
            raise ValidationError(
                f"layer {self.index}: {self.kind} layer needs param_count > 0")
        if self.kind in ("pool", "activation") and self.param_count != 0:
            raise ValidationError(
                f"layer {self.index}: {self.kind} layer must have param_count 0")


def dense_layer(index: int, fan_in: int, fan_out: int) -> LayerSpec:
    """Fully connected layer: (fan_in + 1) * fan_out parameters incl. bias."""
    return LayerSpec(index, "dense", fan_in, fan_out,
                     2 * fan_in * fan_out, (fan_in + 1) * fan_out)


def conv_layer(index: int, kernel_h: int, kernel_w: int, in_channels: int,
               out_channels: int, out_h: int, out_w: int,
               input_elems: int) -> LayerSpec:
    """Convolution layer; one bias per output channel."""
    out_elems = out_h * out_w * out_channels
    params = (kernel_h * kernel_w * in_channels + 1) * out_channels
    flops = 2 * kernel_h * kernel_w * in_channels * out_elems
    return LayerSpec(index, "conv", input_elems, out_elems, flops, params)


def pool_layer(index: int, input_elems: int, output_elems: int) -> LayerSpec:
    return LayerSpec(index, "pool", input_elems, output_elems, input_elems, 0)


def activation_layer(index: int, elems: int) -> LayerSpec:
    return LayerSpec(index, "activation", elems, elems, elems, 0)


def param_count(layer: LayerSpec) -> int:
    """Parameter count of a layer (0 for pool/activation)."""
    return layer.param_count


def output_bytes(layer: LayerSpec) -> int:
    """Forward-output size per sample in bytes (4-byte elements)."""
    return BYTES_PER_ELEM * layer.output_elems


@dataclass(frozen=True)
class ModelSpec:
    """An ordered chain of layers plus the raw per-sample input size."""

    name: str
    layers: tuple[LayerSpec, ...]
    sample_bytes: int

    def __post_init__(self):
        if not self.layers:
            raise ValidationError("model needs at least one layer")
        if self.sample_bytes <= 0:
            raise ValidationError("sample_bytes must be > 0")
        for pos, layer in enumerate(self.layers, start=1):
            if layer.index != pos:
                raise ValidationError(
                    f"layer indices must be 1..N contiguous; position {pos} "
                    f"has index {layer.index}")

    @property
    def num_layers(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class WorkerSpec:
    """Synthetic worker capability: compute in flops/s, updates in params/s."""

    id: str
    compute_rate: float
    update_rate: float

    def __post_init__(self):
        if self.id not in WORKER_IDS:
            raise ValidationError(f"unknown worker id {self.id!r}")
        if not self.compute_rate > 0:
            raise ValidationError(f"worker {self.id}: compute_rate must be > 0")
        if not self.update_rate > 0:
            raise ValidationError(f"worker {self.id}: update_rate must be > 0")


@dataclass(frozen=True)
class NetworkSpec:
    """Physical link bandwidths in bits/second."""

    bw_device_edge: float
    bw_edge_cloud: float

    def __post_init__(self):
        if not self.bw_device_edge > 0:
            raise ValidationError("bw_device_edge must be > 0")
        if not self.bw_edge_cloud > 0:
            raise ValidationError("bw_edge_cloud must be > 0")


@dataclass(frozen=True)
class CostProfile:
    """Per-worker, per-layer cost tables for one model.

    Time tables are tuples indexed [worker][layer-1]; forward/backward are
    seconds per sample, update is seconds per layer.
    """

    model: ModelSpec
    forward_time: Mapping[str, tuple[float, ...]]
    backward_time: Mapping[str, tuple[float, ...]]
    update_time: Mapping[str, tuple[float, ...]]
    param_counts: tuple[int, ...]
    output_bytes: tuple[int, ...]

    def __post_init__(self):
        n = self.model.num_layers
        for label, table in (("forward", self.forward_time),
                             ("backward", self.backward_time),
                             ("update", self.update_time)):
            if set(table) != set(WORKER_IDS):
                raise ValidationError(
                    f"{label} table must cover exactly {WORKER_IDS}")
            for worker, row in table.items():
                if len(row) != n:
                    raise ValidationError(
                        f"{label}[{worker}]: expected {n} entries, got {len(row)}")
                for i, t in enumerate(row):
                    if not (t >= 0 and math.isfinite(t)):
                        raise ValidationError(
                            f"{label}[{worker}][{i}]: time must be finite and >= 0")
        if len(self.param_counts) != n or len(self.output_bytes) != n:
            raise ValidationError("per-layer arrays must have one entry per layer")
        for i, layer in enumerate(self.model.layers):
            if self.param_counts[i] != layer.param_count:
                raise ValidationError(f"param_counts[{i}] disagrees with layer")
            if self.output_bytes[i] != BYTES_PER_ELEM * layer.output_elems:
                raise ValidationError(
                    f"output_bytes[{i}] must equal {BYTES_PER_ELEM} * output_elems")

    @property
    def num_layers(self) -> int:
        return self.model.num_layers


def synthesize_profile(model: ModelSpec,
                       workers: Iterable[WorkerSpec]) -> CostProfile:
    """Build a cost table from worker rates.

    forward = flops / compute_rate, backward = exactly 2x forward,
    update = param_count / update_rate.
    """
    by_id = {w.id: w for w in workers}
    if set(by_id) != set(WORKER_IDS):
        raise ValidationError(
            f"workers must cover exactly {WORKER_IDS}, got {sorted(by_id)}")
    fwd = {}
    bwd = {}
    upd = {}
    for wid, w in by_id.items():
        fwd[wid] = tuple(layer.flops_forward / w.compute_rate
                         for layer in model.layers)
        bwd[wid] = tuple(2.0 * t for t in fwd[wid])
        upd[wid] = tuple(layer.param_count / w.update_rate
                         for layer in model.layers)
    return CostProfile(
        model=model,
        forward_time=fwd,
        backward_time=bwd,
        update_time=upd,
        param_counts=tuple(layer.param_count for layer in model.layers),
        output_bytes=tuple(output_bytes(layer) for layer in model.layers),
    )


def scale_worker_compute(profile: CostProfile, worker: str,
                         multiplier: float) -> CostProfile:
    """Scale one worker's compute rate; forward/backward times divide by it.

    Update times are left untouched (they follow the update rate, not the
    compute rate).
    """
    if worker not in WORKER_IDS:
        raise ValidationError(f"unknown worker id {worker!r}")
    if not multiplier > 0:
        raise ValidationError("compute multiplier must be > 0")
    fwd = dict(profile.forward_time)
    bwd = dict(profile.backward_time)
    fwd[worker] = tuple(t / multiplier for t in fwd[worker])
    bwd[worker] = tuple(t / multiplier for t in bwd[worker])
    return replace(profile, forward_time=fwd, backward_time=bwd)


# ---------------------------------------------------------------------------
# JSON document round trip
# ---------------------------------------------------------------------------

def profile_to_dict(profile: CostProfile) -> dict:
    return {
        "model": {
            "name": profile.model.name,
            "sample_bytes": profile.model.sample_bytes,
            "layers": [
                {
                    "index": layer.index,
                    "kind": layer.kind,
                    "input_elems": layer.input_elems,
                    "output_elems": layer.output_elems,
                    "flops_forward": layer.flops_forward,
                    "param_count": layer.param_count,
                }
                for layer in profile.model.layers
            ],
        },
        "times": {
            wid: {
                "forward": list(profile.forward_time[wid]),
                "backward": list(profile.backward_time[wid]),
                "update": list(profile.update_time[wid]),
            }
            for wid in WORKER_IDS
        },
    }


def _need(doc: dict, field: str, path: str):
    if not isinstance(doc, dict) or field not in doc:
        raise SchemaError(f"{path}.{field}" if path else field, "missing")
    return doc[field]


def _int_field(doc: dict, field: str, path: str) -> int:
    value = _need(doc, field, path)
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{path}.{field}", "must be an integer")
    return value


def profile_from_dict(doc: dict) -> CostProfile:
    """Parse and validate the profile document schema.

    Raises SchemaError naming the offending field on malformed input.
    """
    model_doc = _need(doc, "model", "")
    name = _need(model_doc, "name", "model")
    if not isinstance(name, str):
        raise SchemaError("model.name", "must be a string")
    sample_bytes = _int_field(model_doc, "sample_bytes", "model")
    layers_doc = _need(model_doc, "layers", "model")
    if not isinstance(layers_doc, list) or not layers_doc:
        raise SchemaError("model.layers", "must be a non-empty list")
    layers = []
    for i, ld in enumerate(layers_doc):
        path = f"model.layers[{i}]"
        kind = _need(ld, "kind", path)
        try:
            layers.append(LayerSpec(
                index=_int_field(ld, "index", path),
                kind=kind,
                input_elems=_int_field(ld, "input_elems", path),
                output_elems=_int_field(ld, "output_elems", path),
                flops_forward=_int_field(ld, "flops_forward", path),
                param_count=_int_field(ld, "param_count", path),
            ))
        except ValidationError as exc:
            raise SchemaError(path, str(exc)) from exc
    try:
        model = ModelSpec(name=name, layers=tuple(layers),
                          sample_bytes=sample_bytes)
    except ValidationError as exc:
        raise SchemaError("model", str(exc)) from exc

    times_doc = _need(doc, "times", "")
    if not isinstance(times_doc, dict) or set(times_doc) != set(WORKER_IDS):
        raise SchemaError(
            "times", f"must have exactly the keys {sorted(WORKER_IDS)}")
    tables = {"forward": {}, "backward": {}, "update": {}}
    for wid in WORKER_IDS:
        wdoc = times_doc[wid]
        for label in ("forward", "backward", "update"):
            row = _need(wdoc, label, f"times.{wid}")
            path = f"times.{wid}.{label}"
            if not isinstance(row, list):
                raise SchemaError(path, "must be a list of seconds")
            if len(row) != model.num_layers:
                raise SchemaError(
                    path, f"expected {model.num_layers} entries, got {len(row)}")
            values = []
            for i, t in enumerate(row):
                if isinstance(t, bool) or not isinstance(t, (int, float)):
                    raise SchemaError(f"{path}[{i}]", "must be a number")
                if not (t >= 0 and math.isfinite(t)):
                    raise SchemaError(f"{path}[{i}]", "must be finite and >= 0")
                values.append(float(t))
            tables[label][wid] = tuple(values)
    try:
        return CostProfile(
            model=model,
            forward_time=tables["forward"],
            backward_time=tables["backward"],
            update_time=tables["update"],
            param_counts=tuple(l.param_count for l in model.layers),
            output_bytes=tuple(output_bytes(l) for l in model.layers),
        )
    except ValidationError as exc:
        raise SchemaError("times", str(exc)) from exc


def save_profile(profile: CostProfile, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profile_to_dict(profile), fh, indent=2)
        fh.write("\n")


def load_profile(path: str | os.PathLike) -> CostProfile:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("<document>", f"not valid JSON: {exc}") from exc
    return profile_from_dict(doc)
