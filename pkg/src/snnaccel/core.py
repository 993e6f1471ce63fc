"""Core spiking data types and integer neuron dynamics.

Everything here is exact integer (or fixed-point) arithmetic: spikes are
0/1 bits, weights are int8, membrane potentials are saturating signed
integers of a configurable bit width. No floats enter the compute path.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

LEAK_FRAC_BITS = 8
LEAK_ONE = 1 << LEAK_FRAC_BITS  # fixed-point 1.0


class ShapeError(ValueError):
    """Operand shapes disagree with the layer geometry."""


class ConfigError(ValueError):
    """Layer chain or layer spec is internally inconsistent."""


class DegenerateInputError(ValueError):
    """An operation received an input with no neurons."""


class ConvMode(Enum):
    STANDARD = "standard"
    DEPTHWISE = "depthwise"
    POINTWISE = "pointwise"
    FULLY_CONNECTED = "fc"
    POOL = "pool"


@dataclass(frozen=True)
class SpikeVector:
    """Channel-packed spike bits at one pixel position."""

    bits: np.ndarray  # shape (C,), uint8 values in {0, 1}

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise ShapeError(f"spike vector must be 1-D, got shape {arr.shape}")
        if arr.size and arr.max() > 1:
            raise ValueError("spike bits must be 0 or 1")
        object.__setattr__(self, "bits", arr)

    def __len__(self) -> int:
        return self.bits.shape[0]


@dataclass(frozen=True)
class SpikeFrame:
    """One timestep's binary feature map, stored as an (H, W, C) bit grid."""

    data: np.ndarray  # shape (H, W, C), uint8 values in {0, 1}

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.uint8)
        if arr.ndim != 3:
            raise ShapeError(f"spike frame must be (H, W, C), got shape {arr.shape}")
        if arr.size and arr.max() > 1:
            raise ValueError("spike bits must be 0 or 1")
        object.__setattr__(self, "data", arr)

    @classmethod
    def zeros(cls, height: int, width: int, channels: int) -> "SpikeFrame":
        return cls(np.zeros((height, width, channels), dtype=np.uint8))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def vector_at(self, y: int, x: int) -> SpikeVector:
        return SpikeVector(self.data[y, x])

    def spike_count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class SpikeTensor:
    """A sequence of identically shaped spike frames, one per timestep."""

    frames: tuple

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValueError("spike tensor needs at least one timestep")
        shape = frames[0].data.shape
        for i, f in enumerate(frames):
            if f.data.shape != shape:
                raise ShapeError(f"frame {i} shape {f.data.shape} != {shape}")
        object.__setattr__(self, "frames", frames)

    @property
    def timesteps(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> tuple:
        return self.frames[0].data.shape


@dataclass
class LayerSpec:
    """Geometry and neuron parameters of one layer.

    `leak` is a decay factor applied to the carried membrane potential each
    timestep; it is quantized to 8 fractional bits (256 == 1.0, which gives
    pure integrate-and-fire behaviour). `vmem_width` is the saturating bit
    width of the membrane accumulator.
    """

    mode: ConvMode
    c_in: int
    c_out: int
    k_h: int = 1
    k_w: int = 1
    stride: int = 1
    padding: int = 0
    threshold: int = 1
    leak: float = 1.0
    parallel_factor: int = 1
    vmem_width: int = 18

    def __post_init__(self):
        if self.mode is ConvMode.DEPTHWISE and self.c_in != self.c_out:
            raise ConfigError(
                f"depthwise layer needs c_in == c_out, got {self.c_in} != {self.c_out}")
        if self.mode is ConvMode.POINTWISE and (self.k_h != 1 or self.k_w != 1):
            raise ConfigError("pointwise layer needs a 1x1 kernel")
        if self.threshold <= 0:
            raise ConfigError("threshold must be positive")
        if self.parallel_factor < 1 or self.parallel_factor > self.c_out:
            raise ConfigError("parallel factor must be in [1, c_out]")
        if self.stride != 1 and self.mode is not ConvMode.POOL:
            raise ConfigError("only stride 1 is supported for convolutions")
        if self.vmem_width < 2:
            raise ConfigError("vmem_width must be at least 2 bits")

    @property
    def leak_fx(self) -> int:
        """Leak as an 8.8 fixed-point integer (256 == 1.0)."""
        return int(round(self.leak * LEAK_ONE))

    def out_size(self, h_in: int, w_in: int) -> tuple:
        if self.mode is ConvMode.POOL:
            if h_in % self.k_h or w_in % self.k_w:
                raise ShapeError(
                    f"pool window {self.k_h}x{self.k_w} does not divide {h_in}x{w_in}")
            return h_in // self.k_h, w_in // self.k_w
        if self.mode is ConvMode.FULLY_CONNECTED:
            return 1, 1
        h_out = h_in + 2 * self.padding - self.k_h + 1
        w_out = w_in + 2 * self.padding - self.k_w + 1
        if h_out < 1 or w_out < 1:
            raise ShapeError(f"kernel {self.k_h}x{self.k_w} larger than padded input")
        return h_out, w_out


@dataclass
class QuantizedWeights:
    """Int8 weights in [c_out][c_in][k_h][k_w] order plus int32 per-channel bias.

    Depthwise layers use a collapsed [c][k_h][k_w] layout since each output
    channel sees exactly one input channel.
    """

    values: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.int8)
        bias = np.asarray(self.bias, dtype=np.int32)
        if bias.ndim != 1:
            raise ShapeError("bias must be one value per output channel")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "bias", bias)

    def validate_against(self, spec: LayerSpec) -> None:
        if spec.mode is ConvMode.DEPTHWISE:
            want = (spec.c_out, spec.k_h, spec.k_w)
        else:
            want = (spec.c_out, spec.c_in, spec.k_h, spec.k_w)
        if self.values.shape != want:
            raise ShapeError(
                f"weight extents {self.values.shape} do not match spec {want}")
        if self.bias.shape != (spec.c_out,):
            raise ShapeError(
                f"bias extent {self.bias.shape} does not match c_out {spec.c_out}")


@dataclass
class MembraneState:
    """Per-neuron saturating integer potentials for one layer.

    `fresh` marks a state that has never been written by a timestep; the
    dataflow engine uses it to distinguish first-timestep zero potentials
    from potentials retrieved out of the Vmem buffer.
    """

    potentials: np.ndarray  # int64, shape (H_out, W_out, C_out)
    vmem_width: int
    fresh: bool = True

    @classmethod
    def zeros(cls, h: int, w: int, c: int, vmem_width: int) -> "MembraneState":
        return cls(np.zeros((h, w, c), dtype=np.int64), vmem_width, fresh=True)

    def nbytes(self) -> float:
        return self.potentials.size * self.vmem_width / 8


def saturate(value, vmem_width: int):
    """Clamp to the open interval (-2^(w-1), 2^(w-1)); works on scalars and arrays."""
    limit = (1 << (vmem_width - 1)) - 1
    return np.clip(value, -limit, limit)


def leak_decay(u, leak_fx: int):
    """Fixed-point leak with truncation toward zero (scalars or int64 arrays)."""
    prod = np.multiply(u, leak_fx, dtype=np.int64)
    return np.where(prod >= 0, prod >> LEAK_FRAC_BITS, -((-prod) >> LEAK_FRAC_BITS))


def integrate_inputs(spikes: SpikeVector, weight_column, bias: int = 0) -> int:
    """Accumulate the weights selected by the spike mask, plus bias."""
    weights = np.asarray(weight_column, dtype=np.int64)
    if weights.shape != spikes.bits.shape:
        raise ShapeError(
            f"weight column length {weights.shape[0]} != spike count {len(spikes)}")
    return int(bias + (weights * spikes.bits).sum())


def neuron_step(u_prev: int, current: int, spec: LayerSpec) -> tuple:
    """One membrane update: leak, integrate, saturate, threshold, hard reset.

    Returns (u_next, spike). Firing uses >= threshold and resets the
    potential to zero. leak == 1.0 reproduces plain integrate-and-fire.
    """
    u_tmp = int(leak_decay(np.int64(u_prev), spec.leak_fx)) + int(current)
    u_tmp = int(saturate(u_tmp, spec.vmem_width))
    if u_tmp >= spec.threshold:
        return 0, 1
    return u_tmp, 0


def membrane_update(u_prev: np.ndarray, currents: np.ndarray, spec: LayerSpec):
    """Vectorized neuron_step over an array of neurons.

    Returns (u_next, spikes) as int64 / uint8 arrays. Semantics are
    bit-identical to calling neuron_step per element.
    """
    u_tmp = leak_decay(u_prev.astype(np.int64), spec.leak_fx) + currents.astype(np.int64)
    u_tmp = saturate(u_tmp, spec.vmem_width)
    spikes = (u_tmp >= spec.threshold).astype(np.uint8)
    u_next = np.where(spikes == 1, 0, u_tmp)
    return u_next, spikes


def sfr_of_frame(tensor: SpikeTensor, layer_index="") -> Fraction:
    """Spike firing rate: total spikes over all timesteps / neurons per frame."""
    h, w, c = tensor.shape
    neurons = h * w * c
    if neurons == 0:
        raise DegenerateInputError(f"layer {layer_index}: frame has zero neurons")
    total = sum(f.spike_count() for f in tensor.frames)
    return Fraction(total, neurons)
