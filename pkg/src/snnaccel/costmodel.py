"""Closed-form cost models: memory access counts, latency, storage, energy.

All access-count formulas are exact products of layer geometry factors and
are validated elsewhere against brute-force loop-nest counters. Storage is
reported in bytes (1 KB == 1000 bytes in the report helpers).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import ConfigError, ConvMode


@dataclass(frozen=True)
class ConvGeometry:
    """Geometry of one convolution layer as seen by the cost model."""

    c_in: int
    c_out: int
    k_h: int
    k_w: int
    h_out: int
    w_out: int
    h_in: int
    w_in: int
    mode: ConvMode = ConvMode.STANDARD


@dataclass(frozen=True)
class AccessCounts:
    input_reads: int
    weight_reads: int
    psum_accesses: int


@dataclass(frozen=True)
class LatencyParams:
    """Cycle costs of the convolution inner loop.

    t_rw: weight read; t_pe: one accumulate inside a PE along the input
    channel direction; t_pes: reduction of the partial sums of all PEs.
    """

    t_rw: int = 0
    t_pe: int = 1
    t_pes: int = 0

    def __post_init__(self):
        if min(self.t_rw, self.t_pe, self.t_pes) < 0:
            raise ValueError("latency components must be >= 0")


@dataclass(frozen=True)
class EnergyConstants:
    """Per-event energy weights. Defaults are unitless placeholders; only
    ratios derived from them are meaningful."""

    e_acc: float = 1.0
    e_read: dict = field(default_factory=lambda: {
        "input": 1.0, "weight": 1.0, "psum": 2.0})
    p_static: float = 0.0


def access_counts_os(geo: ConvGeometry, timesteps: int) -> AccessCounts:
    """Output-stationary counts: operands re-fetched per output pixel, no
    partial-sum traffic in the single-timestep case."""
    per_pixel = geo.c_in * geo.k_w * geo.k_h
    pixels = geo.c_out * geo.w_out * geo.h_out
    return AccessCounts(
        input_reads=per_pixel * pixels * timesteps,
        weight_reads=per_pixel * pixels * timesteps,
        psum_accesses=geo.c_out * geo.w_out * geo.h_out * (timesteps - 1),
    )


def access_counts_ws(geo: ConvGeometry, timesteps: int) -> AccessCounts:
    """Weight-stationary counts: each weight fetched once per timestep, but
    partial sums move for every (c_in, c_out) pair."""
    return AccessCounts(
        input_reads=geo.k_w * geo.k_h * geo.w_out * geo.h_out
        * geo.c_in * geo.c_out * timesteps,
        weight_reads=geo.c_in * geo.k_w * geo.k_h * geo.c_out * timesteps,
        psum_accesses=geo.c_in * geo.c_out * geo.w_out * geo.h_out * timesteps,
    )


def access_counts_mode(mode: ConvMode, geo: ConvGeometry, timesteps: int) -> AccessCounts:
    """Line-buffered output-stationary counts per convolution mode.

    Inputs are fetched once per pixel regardless of mode; weights stream as
    one channel word per broadcast.
    """
    inputs = geo.h_in * geo.w_in * timesteps
    out_pixels = geo.h_out * geo.w_out
    if mode in (ConvMode.STANDARD, ConvMode.POINTWISE):
        weights = geo.c_in * geo.c_out * out_pixels * timesteps
    elif mode is ConvMode.DEPTHWISE:
        weights = geo.c_out * out_pixels * timesteps
    else:
        raise ConfigError(f"no access model for mode {mode}")
    return AccessCounts(
        input_reads=inputs,
        weight_reads=weights,
        psum_accesses=geo.c_out * out_pixels * (timesteps - 1),
    )


def conv_latency(geo: ConvGeometry, lp: LatencyParams, parallel: int = 1) -> int:
    """Cycles for one convolution layer pass.

    Output pixels are serial; output channels are processed ceil(c_out / p)
    at a time; per channel group the input channels stream through weight
    read + accumulate, followed by the partial-sum reduction.
    """
    if parallel < 1:
        raise ValueError("parallel factor must be >= 1")
    groups = math.ceil(geo.c_out / parallel)
    inner = geo.c_in * (lp.t_rw + lp.t_pe) + lp.t_pes
    return geo.h_out * geo.w_out * groups * inner


def pipeline_latency(layer_cycles: list, frames: int) -> tuple:
    """Steady-state pipeline model over N frames.

    Returns (makespan, avg_per_frame): the bottleneck stage runs once per
    frame while every other stage contributes a single fill/drain term.
    """
    if frames < 1:
        raise ValueError("frame count must be >= 1")
    if not layer_cycles:
        raise ValueError("need at least one layer")
    bottleneck = max(layer_cycles)
    makespan = frames * bottleneck + (sum(layer_cycles) - bottleneck)
    return makespan, makespan / frames


def vmem_bytes(config, timesteps: int) -> list:
    """Membrane storage per convolution pipeline layer, in bytes.

    Single-timestep operation needs no carried potential at all, so every
    entry is 0 when timesteps == 1.
    """
    out = []
    for spec, geo in config.conv_layers():
        if timesteps == 1:
            out.append(0.0)
        else:
            neurons = geo.h_out * geo.w_out * geo.c_out
            out.append(neurons * spec.vmem_width / 8)
    return out


def energy_estimate(tallies, accumulate_ops: int, ec: EnergyConstants,
                    runtime: float = 0.0) -> float:
    """Energy proxy: reads and accumulates weighted by the constants, plus
    static power over the runtime."""
    dynamic = 0.0
    for t in tallies:
        dynamic += t.input_reads * ec.e_read["input"]
        dynamic += t.weight_reads * ec.e_read["weight"]
        dynamic += t.psum_accesses * ec.e_read["psum"]
    dynamic += accumulate_ops * ec.e_acc
    return dynamic + ec.p_static * runtime


def _min_parallel_for(geo: ConvGeometry, lp: LatencyParams, target: int) -> int | None:
    """Smallest parallel factor whose latency is <= target, or None."""
    pixels = geo.h_out * geo.w_out
    inner = geo.c_in * (lp.t_rw + lp.t_pe) + lp.t_pes
    if pixels * inner == 0:
        return 1
    max_groups = target // (pixels * inner)
    if max_groups < 1:
        return None  # even full parallelism cannot reach the target
    if max_groups >= geo.c_out:
        return 1
    # smallest p with ceil(c_out / p) <= max_groups
    return math.ceil(geo.c_out / max_groups)


def best_parallel_factors(geometries: list, pe_budget: int,
                          lp: LatencyParams | None = None) -> list:
    """Per-layer output-channel parallel factors minimizing the bottleneck.

    Each layer spends parallel * k_h * k_w processing elements; the search
    minimizes the maximum conv_latency subject to the total PE budget and,
    among optima, returns the smallest per-layer factors (hence the smallest
    total PE count).
    """
    lp = lp or LatencyParams()
    if not geometries:
        raise ValueError("need at least one convolution layer")
    floor_cost = sum(g.k_h * g.k_w for g in geometries)
    if pe_budget < floor_cost:
        raise ConfigError(
            f"PE budget {pe_budget} below minimum {floor_cost} (one PE set per layer)")

    candidates = sorted({conv_latency(g, lp, p)
                         for g in geometries
                         for p in range(1, g.c_out + 1)})
    for target in candidates:
        factors = []
        cost = 0
        feasible = True
        for g in geometries:
            p = _min_parallel_for(g, lp, target)
            if p is None:
                feasible = False
                break
            factors.append(p)
            cost += p * g.k_h * g.k_w
        if feasible and cost <= pe_budget:
            return factors
    raise ConfigError("no feasible parallel assignment found")  # pragma: no cover
