"""Symmetric int8 quantization, weight-file export, and the integer
forward pass that mirrors the accelerator's arithmetic.

Scales are per layer: s = max|w| / 127, weights round to int8, and the
firing threshold co-scales as round(threshold / s) so fire decisions stay
scale-invariant up to rounding. The encoder is special: training consumes
pixels / 255 while the accelerator feeds raw u8 pixels into the first
convolution, so its exported threshold carries the extra 255 factor.

The STIW writer here is an independent implementation of the simulator's
documented container format; the two packages only share files.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

STIW_MAGIC = b"STIW"
STIE_MAGIC = b"STIE"
_MODE_CODES = {"standard": 0, "depthwise": 1, "pointwise": 2, "fc": 3}
LEAK_IF = 256  # 8.8 fixed point 1.0


@dataclass
class QuantizedLayer:
    kind: str          # standard | depthwise | pointwise | fc | pool
    c_in: int
    c_out: int
    k_h: int
    k_w: int
    threshold: int
    weights: np.ndarray | None  # int8; None for pool
    scale: float


def quantize_model(model, vmem_width: int = 18) -> list:
    """Quantize every layer of a SpikingNet, keeping pool markers inline."""
    sat_limit = (1 << (vmem_width - 1)) - 1
    weighted = iter(model.weighted_modules())
    out = []
    first_conv = True
    for meta in model.layer_meta:
        if meta["kind"] == "pool":
            out.append(QuantizedLayer("pool", 0, 0, meta["k"], meta["k"],
                                      1, None, 1.0))
            continue
        _, module = next(weighted)
        w = module.weight.detach().numpy().astype(np.float64)
        if meta["kind"] == "fc":
            w = w.reshape(meta["classes"], meta["c_in"], meta["h"], meta["w"])
            c_in, c_out = meta["c_in"], meta["classes"]
            k_h, k_w = meta["h"], meta["w"]
            threshold = 1  # the head never fires
        else:
            c_in, c_out, k_h, k_w = meta["c_in"], meta["c_out"], meta["k"], meta["k"]
            if meta["kind"] == "depthwise":
                w = w.reshape(c_out, k_h, k_w)
        scale = float(np.abs(w).max()) / 127.0
        if scale == 0.0:
            scale = 1.0
        values = np.clip(np.round(w / scale), -127, 127).astype(np.int8)
        if meta["kind"] != "fc":
            factor = 255.0 if first_conv else 1.0
            threshold = max(1, int(round(factor * model.threshold / scale)))
            if threshold > sat_limit:
                raise ValueError(
                    f"quantized threshold {threshold} exceeds the "
                    f"{vmem_width}-bit membrane range; increase vmem_width")
            first_conv = False
        out.append(QuantizedLayer(meta["kind"], c_in, c_out, k_h, k_w,
                                  threshold, values, scale))
    return out


def write_stiw(path: str, layers: list) -> None:
    """Serialize quantized layers in the simulator's weight-file format."""
    weighted = [l for l in layers if l.kind != "pool"]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHH", STIW_MAGIC, 1, len(weighted)))
        for layer in weighted:
            fh.write(struct.pack("<BHHBBih", _MODE_CODES[layer.kind],
                                 layer.c_in, layer.c_out, layer.k_h,
                                 layer.k_w, layer.threshold, LEAK_IF))
            fh.write(layer.weights.astype(np.int8).tobytes())
            fh.write(np.zeros(layer.c_out, dtype="<i4").tobytes())


def quantize_export(model, path: str, vmem_width: int = 18) -> list:
    """Quantize and write in one step; returns the quantized layers."""
    layers = quantize_model(model, vmem_width)
    write_stiw(path, layers)
    return layers


def _saturate(values: np.ndarray, vmem_width: int) -> np.ndarray:
    limit = (1 << (vmem_width - 1)) - 1
    return np.clip(values, -limit, limit)


def _conv_int(x: np.ndarray, layer: QuantizedLayer) -> np.ndarray:
    """Same-padded integer convolution over an (H, W, C) int64 map."""
    pad = layer.k_h // 2
    padded = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    h, w = x.shape[0], x.shape[1]
    windows = np.lib.stride_tricks.sliding_window_view(
        padded, (layer.k_h, layer.k_w), axis=(0, 1))  # (H, W, C, kh, kw)
    if layer.kind == "depthwise":
        return np.einsum("hwckl,ckl->hwc", windows,
                         layer.weights.astype(np.int64))
    flat = windows.reshape(h * w, -1)
    w_mat = layer.weights.reshape(layer.c_out, -1).astype(np.int64)
    return (flat @ w_mat.T).reshape(h, w, layer.c_out)


def integer_forward(layers: list, image: np.ndarray,
                    vmem_width: int = 18):
    """Single-timestep integer inference on one u8 image.

    Returns (class potentials, per-layer spike maps) where the maps cover
    the encoder and every subsequent spiking layer in order, exactly as
    the accelerator computes them.
    """
    x = image.astype(np.int64)
    if x.ndim == 2:
        x = x[:, :, None]
    spike_maps = []
    potentials = None
    for layer in layers:
        if layer.kind == "pool":
            h, w, c = x.shape
            x = x.reshape(h // layer.k_h, layer.k_h,
                          w // layer.k_w, layer.k_w, c).max(axis=(1, 3))
            spike_maps.append(x.astype(np.uint8))
            continue
        if layer.kind == "fc":
            potentials = np.einsum("ochw,hwc->o",
                                   layer.weights.astype(np.int64), x)
            continue
        currents = _saturate(_conv_int(x, layer), vmem_width)
        x = (currents >= layer.threshold).astype(np.int64)
        spike_maps.append(x.astype(np.uint8))
    return potentials, spike_maps


def read_stie(raw: bytes) -> np.ndarray:
    """Decode a spike event stream into a dense (H, W, C) u8 map."""
    magic, version, h, w, c, count = struct.unpack_from("<4sBHHHI", raw)
    if magic != STIE_MAGIC or version != 1:
        raise ValueError("not a spike event stream")
    payload = raw[struct.calcsize("<4sBHHHI"):]
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8),
                         bitorder="little")
    yb = (h - 1).bit_length()
    xb = (w - 1).bit_length()
    ew = yb + xb + c
    data = np.zeros((h, w, c), dtype=np.uint8)
    pos = 0
    for _ in range(count):
        chunk = bits[pos:pos + ew]
        pos += ew
        y = int("".join(map(str, chunk[:yb])), 2) if yb else 0
        x = int("".join(map(str, chunk[yb:yb + xb])), 2) if xb else 0
        data[y, x] = chunk[yb + xb:]
    return data
