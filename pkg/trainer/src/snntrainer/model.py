"""Spiking CNN built from the compact architecture grammar.

Integrate-and-fire neurons with hard reset follow every convolution; the
classification head reports raw per-timestep logits (no firing). The same
static image drives every timestep; the first convolution acts as the
spike encoder. All layers are bias-free so the exported integer network
matches the accelerator's configuration.
"""
from __future__ import annotations

import re

import torch
from torch import nn

from .surrogate import DEFAULT_ALPHA, spike_fn

_CONV_RE = re.compile(r"^(\d+)c(\d+)$")
_DWC_RE = re.compile(r"^(\d+)dwc(\d+)$")
_POOL_RE = re.compile(r"^p(\d+)$")
_FC_RE = re.compile(r"^fc(\d+)?$")


class IFNeuron(nn.Module):
    """Integrate-and-fire with hard reset; membrane persists across the
    timesteps of one sample and resets between samples."""

    def __init__(self, threshold: float = 1.0, alpha: float = DEFAULT_ALPHA):
        super().__init__()
        self.threshold = threshold
        self.alpha = alpha
        self.membrane = None

    def reset(self) -> None:
        self.membrane = None

    def forward(self, current: torch.Tensor) -> torch.Tensor:
        if self.membrane is None:
            self.membrane = torch.zeros_like(current)
        u = self.membrane + current
        spikes = spike_fn(u - self.threshold, self.alpha)
        self.membrane = u * (1.0 - spikes)
        return spikes


class SpikingNet(nn.Module):
    """Layer chain: conv -> IF (encoder), then conv/pool blocks, then a
    linear head producing per-timestep logits."""

    def __init__(self, arch: str, in_channels: int = 1, size: int = 28,
                 threshold: float = 1.0, alpha: float = DEFAULT_ALPHA,
                 seed: int | None = None):
        super().__init__()
        if seed is not None:
            torch.manual_seed(seed)
        self.arch = arch
        self.in_size = size
        self.in_channels = in_channels

        ops = []          # (kind, module) executed per timestep
        layer_meta = []   # export records for weighted layers
        c, s = in_channels, size
        for idx, token in enumerate(t for t in arch.split("-") if t):
            for sub in token.split("/"):
                m = _CONV_RE.match(sub)
                if m:
                    c_out, k = int(m.group(1)), int(m.group(2))
                    conv = nn.Conv2d(c, c_out, k, padding=k // 2, bias=False)
                    neuron = IFNeuron(threshold, alpha)
                    ops.append(("conv", conv))
                    ops.append(("neuron", neuron))
                    layer_meta.append({"kind": "pointwise" if k == 1 else "standard",
                                       "c_in": c, "c_out": c_out, "k": k})
                    c = c_out
                    continue
                m = _DWC_RE.match(sub)
                if m:
                    ch, k = int(m.group(1)), int(m.group(2))
                    if ch != c:
                        raise ValueError(
                            f"token {sub!r}: depthwise channels {ch} != {c}")
                    conv = nn.Conv2d(c, c, k, padding=k // 2, groups=c, bias=False)
                    ops.append(("conv", conv))
                    ops.append(("neuron", IFNeuron(threshold, alpha)))
                    layer_meta.append({"kind": "depthwise", "c_in": c,
                                       "c_out": c, "k": k})
                    continue
                m = _POOL_RE.match(sub)
                if m:
                    win = int(m.group(1))
                    if s % win:
                        raise ValueError(f"pool {win} does not divide {s}")
                    ops.append(("pool", nn.MaxPool2d(win)))
                    layer_meta.append({"kind": "pool", "k": win})
                    s //= win
                    continue
                m = _FC_RE.match(sub)
                if m:
                    classes = int(m.group(1)) if m.group(1) else 10
                    fc = nn.Linear(c * s * s, classes, bias=False)
                    ops.append(("fc", fc))
                    layer_meta.append({"kind": "fc", "c_in": c, "h": s, "w": s,
                                       "classes": classes})
                    continue
                raise ValueError(f"unparseable token {sub!r}")

        if layer_meta[-1]["kind"] != "fc":
            raise ValueError("architecture must end with a fc head")
        self.ops = nn.ModuleList(module for _, module in ops)
        self.kinds = [kind for kind, _ in ops]
        self.layer_meta = layer_meta
        self.threshold = threshold

    def reset(self) -> None:
        for kind, module in zip(self.kinds, self.ops):
            if kind == "neuron":
                module.reset()

    def forward(self, x: torch.Tensor, timesteps: int,
                record_spikes: list | None = None) -> torch.Tensor:
        """Run `timesteps` steps on a static batch; returns (T, B, classes).

        When record_spikes is a list, every neuron layer's spike tensor is
        appended per timestep (for firing-rate profiling).
        """
        self.reset()
        logits = []
        for _ in range(timesteps):
            h = x
            step_spikes = []
            for kind, module in zip(self.kinds, self.ops):
                if kind == "fc":
                    h = module(h.flatten(1))
                else:
                    h = module(h)
                    if kind == "neuron":
                        step_spikes.append(h)
            logits.append(h)
            if record_spikes is not None:
                record_spikes.append(step_spikes)
        return torch.stack(logits)

    def weighted_modules(self):
        """Conv/linear modules in execution order, paired with their meta."""
        out = []
        meta_iter = iter(m for m in self.layer_meta if m["kind"] != "pool")
        for kind, module in zip(self.kinds, self.ops):
            if kind in ("conv", "fc"):
                out.append((next(meta_iter), module))
        return out


def sdt_loss(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Cross entropy of the time-averaged logits."""
    return nn.functional.cross_entropy(logits.mean(dim=0), target)


def tet_loss(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Time-averaged per-timestep cross entropy."""
    losses = [nn.functional.cross_entropy(step, target) for step in logits]
    return torch.stack(losses).mean()
