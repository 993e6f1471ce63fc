"""Spike encoding of raw images through the first convolution layer.

Pixel intensities (u8) are convolved with the encoder's int8 weights; the
resulting integer currents drive the usual neuron update. The same static
image feeds every timestep; membrane potentials persist across timesteps
when more than one is run.
"""
from __future__ import annotations

import numpy as np

from .core import (
    ConvMode,
    ConfigError,
    LayerSpec,
    MembraneState,
    QuantizedWeights,
    ShapeError,
    SpikeFrame,
    SpikeTensor,
    membrane_update,
)
from .dataflow import extract_windows


def encode_input(image: np.ndarray, spec: LayerSpec, weights: QuantizedWeights,
                 timesteps: int) -> SpikeTensor:
    """Run the encoder layer over one image for the requested timesteps.

    `image` is (H, W) or (H, W, C) with unsigned 8-bit intensities.
    """
    if spec.mode is not ConvMode.STANDARD:
        raise ConfigError("the encoder must be a standard convolution layer")
    img = np.asarray(image)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] != spec.c_in:
        raise ShapeError(
            f"image shape {image.shape} does not match encoder c_in {spec.c_in}")
    weights.validate_against(spec)

    windows, h_out, w_out = extract_windows(img.astype(np.int64),
                                            spec.k_h, spec.k_w, spec.padding)
    flat = windows.reshape(windows.shape[0], -1)
    w_mat = weights.values.reshape(spec.c_out, -1).astype(np.int64)
    currents = (flat @ w_mat.T + weights.bias.astype(np.int64)).reshape(
        h_out, w_out, spec.c_out)

    frames = []
    state = MembraneState.zeros(h_out, w_out, spec.c_out, spec.vmem_width) \
        if timesteps > 1 else None
    u = state.potentials if state is not None else np.zeros_like(currents)
    for _ in range(timesteps):
        u, spikes = membrane_update(u, currents, spec)
        frames.append(SpikeFrame(spikes))
    return SpikeTensor(tuple(frames))
