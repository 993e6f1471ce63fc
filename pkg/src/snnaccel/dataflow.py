"""Functional model of the output-stationary convolution pipeline.

Each convolution keeps the output neuron resident: for every output pixel
the whole receptive field is consumed, weights are broadcast channel by
channel, and the accumulated current feeds one neuron update. Results are
exact integers, so they can be compared against brute-force references
with equality.

Access tally semantics (one entry per layer invocation):
  input_reads   one read per real input pixel consumed into the line
                buffer (padding positions are synthesized, not read)
  weight_reads  one read per broadcast weight word: per (output pixel,
                c_out, c_in) for standard/pointwise, per (output pixel,
                channel) for depthwise
  psum_accesses one retrieval per neuron of a potential stored by an
                earlier timestep (zero whenever the layer runs single
                timestep)
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import (
    ConfigError,
    ConvMode,
    LayerSpec,
    MembraneState,
    QuantizedWeights,
    ShapeError,
    SpikeFrame,
    SpikeTensor,
    SpikeVector,
    membrane_update,
    sfr_of_frame,
)


@dataclass
class AccessTally:
    input_reads: int = 0
    weight_reads: int = 0
    psum_accesses: int = 0

    def merge(self, other: "AccessTally") -> None:
        self.input_reads += other.input_reads
        self.weight_reads += other.weight_reads
        self.psum_accesses += other.psum_accesses


@dataclass(frozen=True)
class ReceptiveWindow:
    """K_h x K_w spike vectors feeding the PE array for one output pixel."""

    vectors: np.ndarray  # shape (K_h, K_w, C), uint8


class LineBuffer:
    """K_h chained FIFOs caching input rows for sliding-window extraction.

    Vectors enter the newest-row FIFO; each eviction cascades into the FIFO
    one row older. Window registers hold the last K_w entries seen on every
    row tap, so a full receptive window is available once K_h - 1 complete
    rows plus K_w pixels have been pushed. Windows come out in raster order
    at stride 1 and are bit-identical to direct sliding-window extraction.
    """

    def __init__(self, k_h: int, k_w: int, width: int, channels: int):
        if width < k_w:
            raise ConfigError(f"line buffer width {width} shorter than kernel {k_w}")
        self.k_h = k_h
        self.k_w = k_w
        self.width = width
        self.channels = channels
        self._fifos = [deque() for _ in range(k_h)]
        self._taps = [deque(maxlen=k_w) for _ in range(k_h)]
        self._pushed = 0

    def push(self, vector) -> ReceptiveWindow | None:
        bits = vector.bits if isinstance(vector, SpikeVector) else np.asarray(vector, dtype=np.uint8)
        if bits.shape != (self.channels,):
            raise ShapeError(
                f"vector length {bits.shape} != line buffer width {self.channels} bits")

        entry = bits
        for row in range(self.k_h):
            fifo = self._fifos[row]
            evicted = fifo.popleft() if len(fifo) == self.width else None
            fifo.append(entry)
            # Tap for the newest window row is the raw input; older rows are
            # fed by the eviction chain.
            self._taps[self.k_h - 1 - row].append(entry)
            if evicted is None:
                break
            entry = evicted

        self._pushed += 1
        r, c = divmod(self._pushed - 1, self.width)
        if r >= self.k_h - 1 and c >= self.k_w - 1:
            window = np.stack([np.stack(list(tap)) for tap in self._taps])
            return ReceptiveWindow(window)
        return None


def extract_windows(data: np.ndarray, k_h: int, k_w: int, padding: int):
    """All stride-1 receptive windows of a padded (H, W, C) map.

    Returns (windows, h_out, w_out) where windows has shape
    (H_out * W_out, C, K_h, K_w) in raster order, matching the
    [c_in][k_h][k_w] weight layout when flattened.
    """
    if padding:
        data = np.pad(data, ((padding, padding), (padding, padding), (0, 0)))
    win = sliding_window_view(data, (k_h, k_w), axis=(0, 1))
    h_out, w_out = win.shape[0], win.shape[1]
    return win.reshape(h_out * w_out, data.shape[2], k_h, k_w), h_out, w_out


def _check_conv_input(frame: SpikeFrame, spec: LayerSpec, weights: QuantizedWeights):
    if frame.channels != spec.c_in:
        raise ShapeError(
            f"input has {frame.channels} channels, layer expects {spec.c_in}")
    weights.validate_against(spec)


def _neuron_pass(currents: np.ndarray, spec: LayerSpec,
                 state: MembraneState | None, tally: AccessTally):
    """Threshold an (H_out, W_out, C_out) current map, threading membrane state."""
    if state is None:
        u_prev = np.zeros_like(currents, dtype=np.int64)
    else:
        if state.potentials.shape != currents.shape:
            raise ShapeError(
                f"membrane state shape {state.potentials.shape} != {currents.shape}")
        u_prev = state.potentials
        if not state.fresh:
            tally.psum_accesses += u_prev.size
    u_next, spikes = membrane_update(u_prev, currents, spec)
    new_state = None
    if state is not None:
        new_state = MembraneState(u_next, spec.vmem_width, fresh=False)
    return SpikeFrame(spikes), new_state


def conv_standard(frame: SpikeFrame, spec: LayerSpec, weights: QuantizedWeights,
                  state: MembraneState | None = None):
    """Standard convolution: accumulate across all input channels per filter."""
    if spec.mode is not ConvMode.STANDARD:
        raise ConfigError(f"conv_standard called with mode {spec.mode}")
    _check_conv_input(frame, spec, weights)
    tally = AccessTally()
    tally.input_reads = frame.height * frame.width

    windows, h_out, w_out = extract_windows(frame.data, spec.k_h, spec.k_w, spec.padding)
    flat = windows.reshape(windows.shape[0], -1).astype(np.int64)
    w_mat = weights.values.reshape(spec.c_out, -1).astype(np.int64)
    currents = flat @ w_mat.T + weights.bias.astype(np.int64)
    currents = currents.reshape(h_out, w_out, spec.c_out)
    tally.weight_reads = h_out * w_out * spec.c_out * spec.c_in

    out, new_state = _neuron_pass(currents, spec, state, tally)
    return out, new_state, tally


def conv_depthwise(frame: SpikeFrame, spec: LayerSpec, weights: QuantizedWeights,
                   state: MembraneState | None = None):
    """Depthwise convolution: each channel only sees its own input plane."""
    if spec.mode is not ConvMode.DEPTHWISE:
        raise ConfigError(f"conv_depthwise called with mode {spec.mode}")
    _check_conv_input(frame, spec, weights)
    tally = AccessTally()
    tally.input_reads = frame.height * frame.width

    windows, h_out, w_out = extract_windows(frame.data, spec.k_h, spec.k_w, spec.padding)
    currents = np.einsum("ncij,cij->nc", windows.astype(np.int64),
                         weights.values.astype(np.int64))
    currents = currents + weights.bias.astype(np.int64)
    currents = currents.reshape(h_out, w_out, spec.c_out)
    tally.weight_reads = h_out * w_out * spec.c_out

    out, new_state = _neuron_pass(currents, spec, state, tally)
    return out, new_state, tally


def conv_pointwise(frame: SpikeFrame, spec: LayerSpec, weights: QuantizedWeights,
                   state: MembraneState | None = None):
    """1x1 convolution; identical math to conv_standard with a unit kernel."""
    if spec.mode is not ConvMode.POINTWISE:
        raise ConfigError(f"conv_pointwise called with mode {spec.mode}")
    _check_conv_input(frame, spec, weights)
    tally = AccessTally()
    tally.input_reads = frame.height * frame.width

    currents = frame.data.astype(np.int64) @ weights.values.reshape(
        spec.c_out, spec.c_in).astype(np.int64).T
    currents = currents + weights.bias.astype(np.int64)
    tally.weight_reads = frame.height * frame.width * spec.c_out * spec.c_in

    out, new_state = _neuron_pass(currents, spec, state, tally)
    return out, new_state, tally


def pool_or(frame: SpikeFrame, window: int = 2) -> SpikeFrame:
    """OR-pool each window x window tile per channel (max pool on bits)."""
    if frame.height % window or frame.width % window:
        raise ShapeError(
            f"pool window {window} does not divide {frame.height}x{frame.width}")
    h, w, c = frame.data.shape
    tiles = frame.data.reshape(h // window, window, w // window, window, c)
    return SpikeFrame(tiles.max(axis=(1, 3)))


def flatten_frame(data: np.ndarray) -> np.ndarray:
    """Row-major spatial, channel-minor flattening: index (y*W + x)*C + c."""
    return data.reshape(-1)


def fc_weight_matrix(spec: LayerSpec, weights: QuantizedWeights) -> np.ndarray:
    """Reorder [c_out][c][y][x] storage to match flatten_frame's (y, x, c) order."""
    return np.transpose(weights.values, (0, 2, 3, 1)).reshape(spec.c_out, -1)


def fully_connected(frame: SpikeFrame, spec: LayerSpec, weights: QuantizedWeights,
                    state: MembraneState | None = None):
    """Classification head: raw per-class potentials, no firing.

    The fc kernel spans the whole input frame (k_h == H, k_w == W), so the
    weight tensor keeps the common 4-D layout.
    """
    if spec.mode is not ConvMode.FULLY_CONNECTED:
        raise ConfigError(f"fully_connected called with mode {spec.mode}")
    if (frame.height, frame.width, frame.channels) != (spec.k_h, spec.k_w, spec.c_in):
        raise ShapeError(
            f"fc expects {spec.k_h}x{spec.k_w}x{spec.c_in}, "
            f"got {frame.height}x{frame.width}x{frame.channels}")
    weights.validate_against(spec)
    tally = AccessTally()
    tally.input_reads = frame.height * frame.width
    tally.weight_reads = frame.height * frame.width * spec.c_out

    flat = flatten_frame(frame.data).astype(np.int64)
    w_mat = fc_weight_matrix(spec, weights).astype(np.int64)
    potentials = w_mat @ flat + weights.bias.astype(np.int64)
    return potentials, tally


@dataclass
class RunResult:
    class_scores: list
    per_layer_sfr: list          # Fraction per spike-emitting layer
    tallies: list                # AccessTally per layer
    vmem_bytes: float = 0.0      # live membrane storage during the run
    layer_outputs: list = field(default_factory=list)  # SpikeTensor per spiking layer


_CONV_FUNCS = {
    ConvMode.STANDARD: conv_standard,
    ConvMode.DEPTHWISE: conv_depthwise,
    ConvMode.POINTWISE: conv_pointwise,
}


def run_network(config, weights: list, inp: SpikeTensor,
                keep_outputs: bool = False) -> RunResult:
    """Execute the layer chain over all timesteps of an encoded spike tensor.

    `weights` holds one QuantizedWeights per weighted pipeline layer (pool
    layers carry none). Membrane state is only allocated when the run spans
    more than one timestep; class scores are summed over timesteps. When the
    final layer is fully connected the scores are its potentials, otherwise
    the per-channel spike counts of the last frame.
    """
    layers = config.pipeline_layers
    t_steps = inp.timesteps
    if t_steps != config.timesteps:
        raise ConfigError(
            f"input has {t_steps} timesteps, config declares {config.timesteps}")

    weighted = [l for l in layers if l.mode is not ConvMode.POOL]
    if len(weights) != len(weighted):
        raise ConfigError(
            f"got {len(weights)} weight sets for {len(weighted)} weighted layers")

    h, w, c = inp.shape
    states: list = []
    w_idx = 0
    for i, spec in enumerate(layers):
        if spec.mode is ConvMode.POOL:
            states.append(None)
        else:
            if spec.mode is ConvMode.FULLY_CONNECTED:
                if (spec.k_h, spec.k_w, spec.c_in) != (h, w, c):
                    raise ConfigError(
                        f"layer {i}: fc expects {spec.k_h}x{spec.k_w}x{spec.c_in}, "
                        f"chain carries {h}x{w}x{c}")
            elif spec.c_in != c:
                raise ConfigError(
                    f"layer {i}: expects {spec.c_in} input channels, chain carries {c}")
            weights[w_idx].validate_against(spec)
            w_idx += 1
            if spec.mode in _CONV_FUNCS and t_steps > 1:
                ho, wo = spec.out_size(h, w)
                states.append(MembraneState.zeros(ho, wo, spec.c_out, spec.vmem_width))
            else:
                states.append(None)
        h, w = spec.out_size(h, w)
        c = spec.c_out

    tallies = [AccessTally() for _ in layers]
    spike_frames: list = [[] for _ in layers]  # conv/pool outputs per timestep
    scores = None

    for t in range(t_steps):
        frame = inp.frames[t]
        w_idx = 0
        for i, spec in enumerate(layers):
            if spec.mode is ConvMode.POOL:
                tallies[i].input_reads += frame.height * frame.width
                frame = pool_or(frame, spec.k_h)
                spike_frames[i].append(frame)
                continue
            qw = weights[w_idx]
            w_idx += 1
            if spec.mode is ConvMode.FULLY_CONNECTED:
                potentials, tally = fully_connected(frame, spec, qw)
                tallies[i].merge(tally)
                scores = potentials if scores is None else scores + potentials
            else:
                frame, states[i], tally = _CONV_FUNCS[spec.mode](frame, spec, qw, states[i])
                tallies[i].merge(tally)
                spike_frames[i].append(frame)

    if scores is None:
        # No classification head: report per-channel spike counts of the
        # final layer, summed over space and time.
        last = spike_frames[-1]
        scores = np.stack([f.data for f in last]).sum(axis=(0, 1, 2), dtype=np.int64)

    sfrs = []
    outputs = []
    for i, spec in enumerate(layers):
        if spec.mode is ConvMode.FULLY_CONNECTED:
            continue
        tensor = SpikeTensor(tuple(spike_frames[i]))
        sfrs.append(sfr_of_frame(tensor, layer_index=str(i)))
        if keep_outputs:
            outputs.append(tensor)

    return RunResult([int(s) for s in scores], sfrs, tallies,
                     vmem_bytes=total_vmem_bytes(states),
                     layer_outputs=outputs)


def total_vmem_bytes(states: list) -> float:
    """Bytes of live membrane storage across a list of states (None -> 0)."""
    return sum(s.nbytes() for s in states if s is not None)
