"""Binary weight container shared between the trainer and the simulator.

Layout (little-endian):
    magic "STIW" | u16 version=1 | u16 layer count
    per weighted layer:
        u8 mode | u16 c_in | u16 c_out | u8 k_h | u8 k_w
        | i32 threshold | i16 leak (8.8 fixed point)
        | int8 weights in [c_out][c_in][k_h][k_w] order
          (depthwise collapses to [c][k_h][k_w])
        | i32 bias per output channel

Only weighted layers are stored (pool layers carry no record); fully
connected layers reuse the convolution record with the kernel spanning the
whole input frame. The value stream order matches the broadcast order of
the compute array, so the file can be streamed sequentially.
"""
from __future__ import annotations

import struct
from dataclasses import replace

import numpy as np

from .core import ConvMode, LayerSpec, QuantizedWeights, LEAK_ONE

MAGIC = b"STIW"
VERSION = 1

_MODE_CODES = {
    ConvMode.STANDARD: 0,
    ConvMode.DEPTHWISE: 1,
    ConvMode.POINTWISE: 2,
    ConvMode.FULLY_CONNECTED: 3,
}
_CODE_MODES = {v: k for k, v in _MODE_CODES.items()}

_FILE_HEADER = struct.Struct("<4sHH")
_LAYER_HEADER = struct.Struct("<BHHBBih")


class WeightFileError(ValueError):
    """Malformed weight file or extents that disagree with the config."""


def _weight_count(mode: ConvMode, c_in: int, c_out: int, k_h: int, k_w: int) -> int:
    if mode is ConvMode.DEPTHWISE:
        return c_out * k_h * k_w
    return c_out * c_in * k_h * k_w


def save_weights(path: str, layers: list) -> None:
    """Write (LayerSpec, QuantizedWeights) pairs for all weighted layers."""
    records = [(s, w) for s, w in layers if s.mode is not ConvMode.POOL]
    with open(path, "wb") as fh:
        fh.write(_FILE_HEADER.pack(MAGIC, VERSION, len(records)))
        for spec, weights in records:
            weights.validate_against(spec)
            fh.write(_LAYER_HEADER.pack(
                _MODE_CODES[spec.mode], spec.c_in, spec.c_out,
                spec.k_h, spec.k_w, spec.threshold, spec.leak_fx))
            fh.write(np.ascontiguousarray(weights.values, dtype=np.int8).tobytes())
            fh.write(np.ascontiguousarray(weights.bias, dtype="<i4").tobytes())


def load_weights(path: str, config=None) -> list:
    """Read all layer records as (LayerSpec, QuantizedWeights) pairs.

    When a config is given, every record is checked against the config's
    weighted layers (same order, same extents) and the config's padding,
    parallel factor, and vmem width are carried onto the returned specs.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _FILE_HEADER.size:
        raise WeightFileError(f"{path}: shorter than header")
    magic, version, count = _FILE_HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise WeightFileError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise WeightFileError(f"{path}: unsupported version {version}")

    offset = _FILE_HEADER.size
    layers = []
    for i in range(count):
        if len(raw) < offset + _LAYER_HEADER.size:
            raise WeightFileError(f"{path}: truncated at layer {i} header")
        code, c_in, c_out, k_h, k_w, threshold, leak_fx = \
            _LAYER_HEADER.unpack_from(raw, offset)
        offset += _LAYER_HEADER.size
        if code not in _CODE_MODES:
            raise WeightFileError(f"{path}: layer {i} has unknown mode {code}")
        mode = _CODE_MODES[code]

        n_weights = _weight_count(mode, c_in, c_out, k_h, k_w)
        n_bias = 4 * c_out
        if len(raw) < offset + n_weights + n_bias:
            raise WeightFileError(f"{path}: truncated in layer {i} payload")
        values = np.frombuffer(raw, dtype=np.int8, count=n_weights, offset=offset)
        offset += n_weights
        bias = np.frombuffer(raw, dtype="<i4", count=c_out, offset=offset)
        offset += n_bias

        if mode is ConvMode.DEPTHWISE:
            values = values.reshape(c_out, k_h, k_w)
        else:
            values = values.reshape(c_out, c_in, k_h, k_w)
        spec = LayerSpec(mode=mode, c_in=c_in, c_out=c_out, k_h=k_h, k_w=k_w,
                         padding=k_h // 2 if mode is ConvMode.STANDARD
                         or mode is ConvMode.DEPTHWISE else 0,
                         threshold=threshold, leak=leak_fx / LEAK_ONE)
        layers.append((spec, QuantizedWeights(values.copy(), bias.copy())))

    if config is not None:
        _match_config(path, layers, config)
        # Config decides geometry details (padding, vmem width, parallel
        # factor); the file's trained threshold and leak win.
        merged = []
        for (spec, weights), cfg_spec in zip(layers, config.weighted_layers):
            merged.append((replace(cfg_spec, threshold=spec.threshold,
                                   leak=spec.leak), weights))
        layers = merged
    return layers


def _match_config(path: str, layers: list, config) -> None:
    expected = config.weighted_layers
    if len(layers) != len(expected):
        raise WeightFileError(
            f"{path}: {len(layers)} layer records, config has "
            f"{len(expected)} weighted layers")
    for i, ((spec, _), want) in enumerate(zip(layers, expected)):
        got = (spec.mode, spec.c_in, spec.c_out, spec.k_h, spec.k_w)
        need = (want.mode, want.c_in, want.c_out, want.k_h, want.k_w)
        if got != need:
            raise WeightFileError(
                f"{path}: layer {i} record {got} does not match config {need}")
