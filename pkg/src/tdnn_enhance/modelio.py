"""Binary model files.

Layout (little-endian)::

    b"TDNN"             magic
    u32                 format version
    u32 n_layers, u32 input_dim
    n_layers x (u32 in_dim, u32 out_dim, i32 L, i32 R, u8 activation)
    f64[input_dim]      normalization mean
    f64[input_dim]      normalization std
    per layer: f64[out_dim * in_dim * width] weight (row-major), f64[out_dim] bias
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ModelFormatError, ModelVersionError
from .network import ACTIVATIONS, TdnnLayer, TdnnModel

MAGIC = b"TDNN"
VERSION = 1
_LAYER = struct.Struct("<IIiiB")


def model_to_bytes(model: TdnnModel) -> bytes:
    chunks = [MAGIC, struct.pack("<III", VERSION, len(model.layers), model.input_dim)]
    for layer in model.layers:
        left, right = layer.context
        chunks.append(
            _LAYER.pack(layer.in_dim, layer.out_dim, left, right, ACTIVATIONS.index(layer.activation))
        )
    chunks.append(model.mean.astype("<f8").tobytes())
    chunks.append(model.std.astype("<f8").tobytes())
    for layer in model.layers:
        chunks.append(np.ascontiguousarray(layer.weight, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise ModelFormatError(
                f"file truncated while reading {what}: need {n} bytes, {len(self.data) - self.pos} left",
                self.pos,
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size, what))

    def floats(self, count, what):
        return np.frombuffer(self.take(8 * count, what), dtype="<f8").astype(np.float64)


def model_from_bytes(data: bytes) -> TdnnModel:
    r = _Reader(data)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise ModelVersionError(version, VERSION)
    n_layers, input_dim = r.unpack("<II", "header")
    if n_layers == 0:
        raise ModelFormatError("model has no layers", r.pos - 8)
    specs = []
    for i in range(n_layers):
        at = r.pos
        in_dim, out_dim, left, right, act = r.unpack(_LAYER.format, f"layer {i} header")
        if act >= len(ACTIVATIONS):
            raise ModelFormatError(f"layer {i} has unknown activation tag {act}", at)
        if left > 0 or right < 0:
            raise ModelFormatError(f"layer {i} has invalid context ({left}, {right})", at)
        specs.append((in_dim, out_dim, (left, right), ACTIVATIONS[act]))
    if specs[0][0] != input_dim:
        raise ModelFormatError("first layer input dim disagrees with header", 12)
    mean = r.floats(input_dim, "normalization mean")
    std = r.floats(input_dim, "normalization std")
    layers = []
    for i, (in_dim, out_dim, ctx, act) in enumerate(specs):
        width = ctx[1] - ctx[0] + 1
        weight = r.floats(out_dim * in_dim * width, f"layer {i} weight")
        bias = r.floats(out_dim, f"layer {i} bias")
        layers.append(TdnnLayer(ctx, weight.reshape(out_dim, in_dim * width), bias, act))
    if r.pos != len(data):
        raise ModelFormatError(f"{len(data) - r.pos} trailing bytes after parameters", r.pos)
    try:
        return TdnnModel(layers, mean, std)
    except ValueError as exc:
        raise ModelFormatError(f"inconsistent model: {exc}", r.pos) from exc


def save_model(model: TdnnModel, path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path) -> TdnnModel:
    return model_from_bytes(Path(path).read_bytes())
