"""Independent brute-force references used by the test suite.

Everything here is written as plain Python loop nests with its own copy of
the arithmetic rules, deliberately not reusing the package's vectorized
paths.
"""
from __future__ import annotations

import numpy as np


def neuron_ref(u_prev: int, current: int, threshold: int, leak_fx: int,
               vmem_width: int):
    """Reference membrane update: leak (truncate toward zero), integrate,
    saturate, fire at >= threshold with hard reset."""
    prod = u_prev * leak_fx
    if prod >= 0:
        leaked = prod >> 8
    else:
        leaked = -((-prod) >> 8)
    u = leaked + current
    limit = (1 << (vmem_width - 1)) - 1
    u = max(-limit, min(limit, u))
    if u >= threshold:
        return 0, 1
    return u, 0


def pad_frame(data: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return data
    h, w, c = data.shape
    out = np.zeros((h + 2 * pad, w + 2 * pad, c), dtype=data.dtype)
    out[pad:pad + h, pad:pad + w] = data
    return out


def conv_currents_ref(data: np.ndarray, weights: np.ndarray, bias: np.ndarray,
                      k_h: int, k_w: int, pad: int, depthwise: bool) -> np.ndarray:
    """Dense loop-nest convolution over a binary or integer (H, W, C) map."""
    padded = pad_frame(data.astype(np.int64), pad)
    h_in, w_in, c_in = padded.shape
    h_out = h_in - k_h + 1
    w_out = w_in - k_w + 1
    c_out = weights.shape[0]
    currents = np.zeros((h_out, w_out, c_out), dtype=np.int64)
    for y in range(h_out):
        for x in range(w_out):
            for co in range(c_out):
                acc = int(bias[co])
                for ky in range(k_h):
                    for kx in range(k_w):
                        if depthwise:
                            acc += int(weights[co, ky, kx]) * int(padded[y + ky, x + kx, co])
                        else:
                            for ci in range(data.shape[2]):
                                acc += int(weights[co, ci, ky, kx]) * \
                                    int(padded[y + ky, x + kx, ci])
                currents[y, x, co] = acc
    return currents


def conv_ref(data: np.ndarray, weights: np.ndarray, bias: np.ndarray,
             k_h: int, k_w: int, pad: int, threshold: int, leak_fx: int,
             vmem_width: int, u_prev: np.ndarray | None, depthwise: bool):
    """Full reference layer pass: convolution currents plus neuron updates."""
    currents = conv_currents_ref(data, weights, bias, k_h, k_w, pad, depthwise)
    h, w, c = currents.shape
    if u_prev is None:
        u_prev = np.zeros((h, w, c), dtype=np.int64)
    spikes = np.zeros((h, w, c), dtype=np.uint8)
    u_next = np.zeros((h, w, c), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            for co in range(c):
                u, s = neuron_ref(int(u_prev[y, x, co]), int(currents[y, x, co]),
                                  threshold, leak_fx, vmem_width)
                u_next[y, x, co] = u
                spikes[y, x, co] = s
    return spikes, u_next


def pool_ref(data: np.ndarray, window: int) -> np.ndarray:
    """Per-channel max pooling on a binary map."""
    h, w, c = data.shape
    out = np.zeros((h // window, w // window, c), dtype=np.uint8)
    for y in range(h // window):
        for x in range(w // window):
            for ch in range(c):
                best = 0
                for dy in range(window):
                    for dx in range(window):
                        best = max(best, int(data[y * window + dy,
                                                  x * window + dx, ch]))
                out[y, x, ch] = best
    return out


def fc_ref(data: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Flatten (y, x, c)-minor and multiply against [c_out][c][y][x] weights."""
    h, w, c = data.shape
    c_out = weights.shape[0]
    out = np.zeros(c_out, dtype=np.int64)
    for co in range(c_out):
        acc = int(bias[co])
        for y in range(h):
            for x in range(w):
                for ch in range(c):
                    acc += int(weights[co, ch, y, x]) * int(data[y, x, ch])
        out[co] = acc
    return out


def sliding_windows_ref(data: np.ndarray, k_h: int, k_w: int) -> list:
    """Raster-order list of (K_h, K_w, C) windows, no padding, stride 1."""
    h, w, _ = data.shape
    out = []
    for y in range(h - k_h + 1):
        for x in range(w - k_w + 1):
            out.append(data[y:y + k_h, x:x + k_w, :].copy())
    return out


def count_os_ref(c_in, c_out, k_h, k_w, h_out, w_out, timesteps):
    """Loop-nest access counter, output-stationary."""
    inputs = weights = psums = 0
    for _t in range(timesteps):
        for _co in range(c_out):
            for _y in range(h_out):
                for _x in range(w_out):
                    for _ci in range(c_in):
                        for _ky in range(k_h):
                            for _kx in range(k_w):
                                inputs += 1
                                weights += 1
    for t in range(timesteps):
        if t == 0:
            continue
        for _co in range(c_out):
            for _y in range(h_out):
                for _x in range(w_out):
                    psums += 1
    return inputs, weights, psums


def count_ws_ref(c_in, c_out, k_h, k_w, h_out, w_out, timesteps):
    """Loop-nest access counter, weight-stationary."""
    inputs = weights = psums = 0
    for _t in range(timesteps):
        for _ci in range(c_in):
            for _co in range(c_out):
                for _ky in range(k_h):
                    for _kx in range(k_w):
                        weights += 1
                        for _y in range(h_out):
                            for _x in range(w_out):
                                inputs += 1
                for _y in range(h_out):
                    for _x in range(w_out):
                        psums += 1
    return inputs, weights, psums


def count_mode_ref(mode: str, c_in, c_out, h_in, w_in, h_out, w_out, timesteps):
    """Loop-nest access counter for the line-buffered dataflow per mode."""
    inputs = weights = psums = 0
    for _t in range(timesteps):
        for _y in range(h_in):
            for _x in range(w_in):
                inputs += 1
    for _t in range(timesteps):
        for _y in range(h_out):
            for _x in range(w_out):
                if mode == "depthwise":
                    for _c in range(c_out):
                        weights += 1
                else:
                    for _co in range(c_out):
                        for _ci in range(c_in):
                            weights += 1
    for t in range(timesteps):
        if t == 0:
            continue
        for _co in range(c_out):
            for _y in range(h_out):
                for _x in range(w_out):
                    psums += 1
    return inputs, weights, psums
