"""Network configuration: layer chains, the compact architecture grammar,
and the JSON config document.

The grammar mirrors the usual compact model strings:

    "28x28 16c3-32c3-p2-32c3-p2-fc10"
    "28x28 16c3-16dwc3/32c1-32dwc3/64c1-64dwc3/64c1-64dwc3/128c1-fc"

Tokens: "<n>c<k>" standard convolution with n output channels and a k x k
kernel ("same" zero padding, stride 1); "<n>dwc<k>" depthwise convolution
(n must equal the incoming channel count); "<n>c1" after a "/" is the
pointwise half of a separable block; "p<w>" OR-pooling with a w x w
window; "fc" or "fc<n>" the classification head (10 classes by default).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .core import ConfigError, ConvMode, LayerSpec
from .costmodel import ConvGeometry, EnergyConstants, LatencyParams

_DIMS_RE = re.compile(r"^(\d+)x(\d+)(?:x(\d+))?$")
_CONV_RE = re.compile(r"^(\d+)c(\d+)$")
_DWC_RE = re.compile(r"^(\d+)dwc(\d+)$")
_POOL_RE = re.compile(r"^p(\d+)$")
_FC_RE = re.compile(r"^fc(\d+)?$")

DEFAULT_THRESHOLD = 64
DEFAULT_LEAK = 1.0
DEFAULT_VMEM_WIDTH = 18


@dataclass
class NetworkConfig:
    """A fully resolved model: input geometry, timesteps, layer chain.

    When encode_first_conv is set, the first layer (a standard convolution)
    acts as the spike encoder over raw pixel intensities and is not part of
    the pipeline that run_network executes.
    """

    input_height: int
    input_width: int
    input_channels: int
    timesteps: int
    layers: list
    encode_first_conv: bool = True
    latency: LatencyParams = field(default_factory=LatencyParams)
    energy: EnergyConstants = field(default_factory=EnergyConstants)
    parallel_factors: list | None = None

    def __post_init__(self):
        if self.timesteps < 1:
            raise ConfigError("timesteps must be >= 1")
        if self.encode_first_conv:
            if not self.layers or self.layers[0].mode is not ConvMode.STANDARD:
                raise ConfigError(
                    "encode_first_conv requires a standard convolution first")
        self._validate_chain()
        if self.parallel_factors is not None:
            convs = [spec for spec, _ in self.conv_layers()]
            if len(self.parallel_factors) != len(convs):
                raise ConfigError(
                    f"{len(self.parallel_factors)} parallel factors for "
                    f"{len(convs)} pipeline convolution layers")
            for spec, p in zip(convs, self.parallel_factors):
                if not 1 <= p <= spec.c_out:
                    raise ConfigError(
                        f"parallel factor {p} out of range for c_out {spec.c_out}")

    @property
    def encoder(self) -> LayerSpec | None:
        return self.layers[0] if self.encode_first_conv else None

    @property
    def pipeline_layers(self) -> list:
        return self.layers[1:] if self.encode_first_conv else self.layers

    @property
    def weighted_layers(self) -> list:
        return [l for l in self.layers if l.mode is not ConvMode.POOL]

    def _shape_walk(self):
        """Yield (index, spec, (h_in, w_in, c_in), (h_out, w_out, c_out))."""
        h, w, c = self.input_height, self.input_width, self.input_channels
        for i, spec in enumerate(self.layers):
            if spec.mode is ConvMode.FULLY_CONNECTED:
                if (spec.k_h, spec.k_w, spec.c_in) != (h, w, c):
                    raise ConfigError(
                        f"layer {i}: fc expects {spec.k_h}x{spec.k_w}x{spec.c_in}, "
                        f"chain carries {h}x{w}x{c}")
            elif spec.c_in != c:
                raise ConfigError(
                    f"layer {i}: expects {spec.c_in} input channels, "
                    f"chain carries {c}")
            try:
                ho, wo = spec.out_size(h, w)
            except ValueError as exc:
                raise ConfigError(f"layer {i}: {exc}") from exc
            yield i, spec, (h, w, c), (ho, wo, spec.c_out)
            h, w, c = ho, wo, spec.c_out

    def _validate_chain(self):
        for _ in self._shape_walk():
            pass

    def layer_shapes(self) -> list:
        """Output (h, w, c) after every layer, input first."""
        shapes = [(self.input_height, self.input_width, self.input_channels)]
        shapes.extend(out for _, _, _, out in self._shape_walk())
        return shapes

    def conv_layers(self, include_encoder: bool = False):
        """(spec, ConvGeometry) for the pipeline convolution layers."""
        first_pipeline = 1 if self.encode_first_conv else 0
        out = []
        for i, spec, (h, w, c), (ho, wo, co) in self._shape_walk():
            if spec.mode not in (ConvMode.STANDARD, ConvMode.DEPTHWISE,
                                 ConvMode.POINTWISE):
                continue
            if i < first_pipeline and not include_encoder:
                continue
            out.append((spec, ConvGeometry(
                c_in=spec.c_in, c_out=spec.c_out, k_h=spec.k_h, k_w=spec.k_w,
                h_out=ho, w_out=wo, h_in=h, w_in=w, mode=spec.mode)))
        return out

    def conv_parallel_factors(self) -> list:
        convs = self.conv_layers()
        if self.parallel_factors is not None:
            return list(self.parallel_factors)
        return [spec.parallel_factor for spec, _ in convs]


def _conv_spec(c_in: int, c_out: int, k: int, defaults: dict,
               mode: ConvMode = ConvMode.STANDARD) -> LayerSpec:
    return LayerSpec(
        mode=mode, c_in=c_in, c_out=c_out, k_h=k, k_w=k,
        padding=k // 2,
        threshold=defaults.get("threshold", DEFAULT_THRESHOLD),
        leak=defaults.get("leak", DEFAULT_LEAK),
        vmem_width=defaults.get("vmem_width", DEFAULT_VMEM_WIDTH),
    )


def parse_arch(arch: str, height: int, width: int, channels: int,
               defaults: dict | None = None) -> list:
    """Expand an architecture string into LayerSpecs, tracking shapes."""
    defaults = defaults or {}
    layers: list = []
    h, w, c = height, width, channels
    tokens = [t for t in arch.strip().split("-") if t]
    if not tokens:
        raise ConfigError("architecture string has no layers")
    for idx, token in enumerate(tokens):
        for sub in token.split("/"):
            m = _DWC_RE.match(sub)
            if m:
                ch, k = int(m.group(1)), int(m.group(2))
                if ch != c:
                    raise ConfigError(
                        f"layer {idx} ({sub!r}): depthwise channels {ch} "
                        f"do not match incoming {c}")
                spec = _conv_spec(c, ch, k, defaults, ConvMode.DEPTHWISE)
                layers.append(spec)
                h, w = spec.out_size(h, w)
                continue
            m = _CONV_RE.match(sub)
            if m:
                c_out, k = int(m.group(1)), int(m.group(2))
                mode = ConvMode.POINTWISE if k == 1 else ConvMode.STANDARD
                spec = _conv_spec(c, c_out, k, defaults, mode)
                layers.append(spec)
                h, w = spec.out_size(h, w)
                c = c_out
                continue
            m = _POOL_RE.match(sub)
            if m:
                win = int(m.group(1))
                if h % win or w % win:
                    raise ConfigError(
                        f"layer {idx} ({sub!r}): pool window {win} does not "
                        f"divide {h}x{w}")
                layers.append(LayerSpec(mode=ConvMode.POOL, c_in=c, c_out=c,
                                        k_h=win, k_w=win))
                h, w = h // win, w // win
                continue
            m = _FC_RE.match(sub)
            if m:
                classes = int(m.group(1)) if m.group(1) else 10
                layers.append(LayerSpec(
                    mode=ConvMode.FULLY_CONNECTED, c_in=c, c_out=classes,
                    k_h=h, k_w=w))
                h, w, c = 1, 1, classes
                continue
            raise ConfigError(f"layer {idx}: unparseable token {sub!r}")
    return layers


def parse_config(text: str, *, encode_first_conv: bool | None = None) -> NetworkConfig:
    """Parse either a JSON config document or a compact model string.

    A model string is "<H>x<W>[x<C>] <arch>"; the channel count defaults
    to 1 and the first convolution acts as the encoder unless overridden.
    """
    stripped = text.strip()
    if stripped.startswith("{"):
        return config_from_dict(json.loads(stripped),
                                encode_first_conv=encode_first_conv)

    parts = stripped.split(None, 1)
    if len(parts) != 2:
        raise ConfigError("model string needs input dims and an architecture")
    m = _DIMS_RE.match(parts[0])
    if not m:
        raise ConfigError(f"bad input dimensions {parts[0]!r}")
    h, w = int(m.group(1)), int(m.group(2))
    c = int(m.group(3)) if m.group(3) else 1
    layers = parse_arch(parts[1], h, w, c)
    return NetworkConfig(
        input_height=h, input_width=w, input_channels=c, timesteps=1,
        layers=layers,
        encode_first_conv=True if encode_first_conv is None else encode_first_conv,
    )


def config_from_dict(doc: dict, *, encode_first_conv: bool | None = None,
                     timesteps: int | None = None) -> NetworkConfig:
    """Build a NetworkConfig from the JSON document schema.

    Required keys: input {height, width, channels}, arch. Optional:
    timesteps, encode_first_conv, defaults {threshold, leak, vmem_width},
    latency {t_rw, t_pe, t_pes}, energy {e_acc, e_read, p_static},
    parallel_factors.
    """
    try:
        inp = doc["input"]
        h, w, c = int(inp["height"]), int(inp["width"]), int(inp["channels"])
    except KeyError as exc:
        raise ConfigError(f"config missing key {exc}") from exc
    if "arch" not in doc:
        raise ConfigError("config missing key 'arch'")
    defaults = doc.get("defaults", {})
    layers = parse_arch(doc["arch"], h, w, c, defaults)

    lat = doc.get("latency", {})
    energy = doc.get("energy", {})
    ec = EnergyConstants(
        e_acc=float(energy.get("e_acc", 1.0)),
        e_read=dict(energy.get("e_read", {"input": 1.0, "weight": 1.0, "psum": 2.0})),
        p_static=float(energy.get("p_static", 0.0)),
    )
    if encode_first_conv is None:
        encode_first_conv = bool(doc.get("encode_first_conv", True))
    if timesteps is None:
        timesteps = int(doc.get("timesteps", 1))
    return NetworkConfig(
        input_height=h, input_width=w, input_channels=c,
        timesteps=timesteps,
        layers=layers,
        encode_first_conv=encode_first_conv,
        latency=LatencyParams(t_rw=int(lat.get("t_rw", 0)),
                              t_pe=int(lat.get("t_pe", 1)),
                              t_pes=int(lat.get("t_pes", 0))),
        energy=ec,
        parallel_factors=(list(doc["parallel_factors"])
                          if doc.get("parallel_factors") else None),
    )
