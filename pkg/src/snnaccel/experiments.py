"""Experiment drivers shared by the service endpoints and the CLI.

Every function here returns plain dicts with a fixed key order so reports
serialize byte-identically across runs.
"""
from __future__ import annotations

import os
from fractions import Fraction

import numpy as np

from . import codec, costmodel, dataflow, pipesim
from .core import ConvMode, SpikeFrame, SpikeTensor, sfr_of_frame
from .encoder import encode_input
from .netconfig import NetworkConfig


def _layer_label(index: int, spec) -> str:
    return f"l{index:02d}_{spec.mode.value}"


def conv_labels(config: NetworkConfig) -> list:
    return [_layer_label(i, spec)
            for i, spec in enumerate(config.pipeline_layers)
            if spec.mode in (ConvMode.STANDARD, ConvMode.DEPTHWISE,
                             ConvMode.POINTWISE)]


def cost_report(config: NetworkConfig, timesteps: int | None = None) -> dict:
    """Per-layer access counts, membrane storage, and latency cycles."""
    t = timesteps if timesteps is not None else config.timesteps
    convs = config.conv_layers()
    factors = config.conv_parallel_factors()
    vmem = costmodel.vmem_bytes(config, t)
    labels = conv_labels(config)

    rows = []
    tallies = []
    for (spec, geo), factor, vbytes, label in zip(convs, factors, vmem, labels):
        counts = costmodel.access_counts_mode(spec.mode, geo, t)
        cycles = costmodel.conv_latency(geo, config.latency, factor)
        tallies.append(counts)
        rows.append({
            "layer": label,
            "mode": spec.mode.value,
            "c_in": geo.c_in, "c_out": geo.c_out,
            "h_out": geo.h_out, "w_out": geo.w_out,
            "input_reads": counts.input_reads,
            "weight_reads": counts.weight_reads,
            "psum_accesses": counts.psum_accesses,
            "vmem_bytes": vbytes,
            "parallel_factor": factor,
            "latency_cycles": cycles,
        })
    ops = sum(r["weight_reads"] for r in rows)
    energy = costmodel.energy_estimate(tallies, ops, config.energy)
    return {
        "timesteps": t,
        "layers": rows,
        "total_vmem_bytes": sum(r["vmem_bytes"] for r in rows),
        "total_vmem_kb": sum(r["vmem_bytes"] for r in rows) / 1000,
        "energy_proxy": energy,
        "bottleneck_cycles": max((r["latency_cycles"] for r in rows), default=0),
    }


def compare_dataflow_report(config: NetworkConfig,
                            timesteps: int | None = None) -> dict:
    """Output-stationary vs weight-stationary access counts per conv layer."""
    t = timesteps if timesteps is not None else config.timesteps
    rows = []
    for (spec, geo), label in zip(config.conv_layers(), conv_labels(config)):
        os_counts = costmodel.access_counts_os(geo, t)
        ws_counts = costmodel.access_counts_ws(geo, t)
        rows.append({
            "layer": label,
            "os_input_reads": os_counts.input_reads,
            "os_weight_reads": os_counts.weight_reads,
            "os_psum_accesses": os_counts.psum_accesses,
            "ws_input_reads": ws_counts.input_reads,
            "ws_weight_reads": ws_counts.weight_reads,
            "ws_psum_accesses": ws_counts.psum_accesses,
            "os_over_ws_weight_ratio":
                os_counts.weight_reads / ws_counts.weight_reads,
        })
    return {"timesteps": t, "layers": rows}


def search_parallel_report(config: NetworkConfig, pe_budget: int) -> dict:
    """Search output-channel parallel factors under a PE budget."""
    convs = config.conv_layers()
    geos = [geo for _, geo in convs]
    factors = costmodel.best_parallel_factors(geos, pe_budget, config.latency)
    base = [costmodel.conv_latency(g, config.latency, 1) for g in geos]
    tuned = [costmodel.conv_latency(g, config.latency, p)
             for g, p in zip(geos, factors)]
    bottleneck_before = max(base)
    bottleneck_after = max(tuned)
    return {
        "pe_budget": pe_budget,
        "factors": factors,
        "pe_used": sum(p * g.k_h * g.k_w for p, g in zip(factors, geos)),
        "layers": [
            {"layer": label, "factor": p,
             "latency_cycles": lt, "latency_cycles_p1": b}
            for label, p, lt, b in zip(conv_labels(config), factors, tuned, base)
        ],
        "bottleneck_before": bottleneck_before,
        "bottleneck_after": bottleneck_after,
        "speedup": bottleneck_before / bottleneck_after if bottleneck_after else 0.0,
    }


def build_stages(config: NetworkConfig, per_pixel: bool = False,
                 capacities: list | None = None) -> list:
    """Pipeline stages from the config's convolution layers."""
    convs = config.conv_layers()
    factors = config.conv_parallel_factors()
    labels = conv_labels(config)
    stages = []
    for (spec, geo), factor, label in zip(convs, factors, labels):
        total = costmodel.conv_latency(geo, config.latency, factor)
        if per_pixel:
            pixels = geo.h_out * geo.w_out
            stages.append(pipesim.StageModel(
                label, total // pixels, units_in=geo.h_in * geo.w_in,
                units_out=pixels))
        else:
            stages.append(pipesim.StageModel(label, total))
    if capacities:
        if len(capacities) != len(stages):
            raise ValueError(f"{len(capacities)} capacities for {len(stages)} stages")
        stages = [pipesim.StageModel(s.label, s.service_cycles, s.units_in,
                                     s.units_out, c)
                  for s, c in zip(stages, capacities)]
    return stages


def pipeline_report(config: NetworkConfig, frames: int,
                    capacities: list | None = None,
                    per_pixel: bool = False,
                    size_buffers: bool = False) -> dict:
    """Simulate the layer pipeline and compare to the analytical model."""
    stages = build_stages(config, per_pixel=per_pixel, capacities=capacities)
    trace = pipesim.simulate_units(stages, frames) if per_pixel \
        else pipesim.simulate(stages, frames)
    analytical = costmodel.pipeline_latency(
        [s.service_cycles * s.units_out for s in stages], frames)
    cmp = pipesim.compare_to_model(trace, analytical)
    report = {
        "frames": frames,
        "granularity": "pixel" if per_pixel else "frame",
        "stages": [{"label": s.label, "service_cycles": s.service_cycles,
                    "units_out": s.units_out,
                    "capacity": s.capacity} for s in stages],
        "makespan": trace.makespan,
        "avg_latency": trace.avg_latency,
        "model_makespan": cmp.model_makespan,
        "abs_gap": cmp.abs_gap,
        "rel_gap": cmp.rel_gap,
        "capacity_limited": cmp.capacity_limited,
        "max_occupancy": trace.max_occupancy,
        "trace": [
            {"frame": f, "stage": stages[s].label,
             "start": trace.starts[f][s], "finish": trace.finishes[f][s]}
            for f in range(frames) for s in range(len(stages))
        ],
    }
    if size_buffers:
        sizing_stages = build_stages(config, per_pixel=True)
        report["sized_capacities"] = pipesim.size_fifos(sizing_stages, frames)
    return report


def _fraction_to_float(value: Fraction) -> float:
    return value.numerator / value.denominator


def run_inference(config: NetworkConfig, weight_layers: list,
                  images: np.ndarray, labels: np.ndarray | None = None,
                  limit: int | None = None,
                  dump_events_dir: str | None = None) -> dict:
    """Classify images end to end: encode, run the pipeline, aggregate.

    `weight_layers` is the (spec, weights) list loaded from a weight file,
    aligned with the config's weighted layers (encoder first when the
    config encodes with its first convolution).
    """
    n = images.shape[0] if limit is None else min(limit, images.shape[0])
    if n == 0:
        raise ValueError("no images to classify")

    if config.encode_first_conv:
        enc_spec, enc_weights = weight_layers[0]
        pipeline_weights = [w for _, w in weight_layers[1:]]
    else:
        enc_spec, enc_weights = None, None
        pipeline_weights = [w for _, w in weight_layers]

    spiking_labels = [label for label, spec in
                      zip((_layer_label(i, s) for i, s in
                           enumerate(config.pipeline_layers)),
                          config.pipeline_layers)
                      if spec.mode is not ConvMode.FULLY_CONNECTED]
    sfr_labels = (["encoder"] if enc_spec is not None else []) + spiking_labels
    sfr_sums = [Fraction(0)] * len(sfr_labels)

    keep = dump_events_dir is not None
    if keep:
        os.makedirs(dump_events_dir, exist_ok=True)

    predictions = []
    correct = 0
    for i in range(n):
        if enc_spec is not None:
            tensor = encode_input(images[i], enc_spec, enc_weights,
                                  config.timesteps)
            enc_sfr = [sfr_of_frame(tensor, layer_index="encoder")]
        else:
            frame = SpikeFrame((images[i] > 0).astype(np.uint8))
            tensor = SpikeTensor(tuple([frame] * config.timesteps))
            enc_sfr = []

        result = dataflow.run_network(config, pipeline_weights, tensor,
                                      keep_outputs=keep)
        pred = int(np.argmax(result.class_scores))
        predictions.append(pred)
        if labels is not None and pred == int(labels[i]):
            correct += 1
        for j, value in enumerate(enc_sfr + result.per_layer_sfr):
            sfr_sums[j] += value

        if keep:
            if enc_spec is not None:
                for t, frame in enumerate(tensor.frames):
                    stream = codec.encode_events(frame)
                    _write_stream(dump_events_dir, i, "enc", t, stream)
            for label, layer_tensor in zip(spiking_labels, result.layer_outputs):
                for t, frame in enumerate(layer_tensor.frames):
                    stream = codec.encode_events(frame)
                    _write_stream(dump_events_dir, i, label, t, stream)

    report = {
        "images": n,
        "timesteps": config.timesteps,
        "accuracy": (correct / n) if labels is not None else None,
        "correct": correct if labels is not None else None,
        "per_layer_sfr": [
            {"layer": label, "sfr": _fraction_to_float(total / n)}
            for label, total in zip(sfr_labels, sfr_sums)
        ],
        "predictions": predictions,
    }
    return report


def _write_stream(directory: str, image_idx: int, label: str, t: int,
                  stream: codec.EventStream) -> None:
    name = f"img{image_idx:05d}_{label}_t{t}.stie"
    with open(os.path.join(directory, name), "wb") as fh:
        fh.write(stream.to_bytes())


def encode_report(config: NetworkConfig, weight_layers: list,
                  image: np.ndarray) -> tuple:
    """Encode one image and wrap the first timestep as an event stream."""
    if not config.encode_first_conv:
        raise ValueError("config has no encoder layer")
    enc_spec, enc_weights = weight_layers[0]
    tensor = encode_input(image, enc_spec, enc_weights, config.timesteps)
    frame = tensor.frames[0]
    stream = codec.encode_events(frame)
    ratio = codec.compression_ratio(frame)
    stats = {
        "height": stream.height,
        "width": stream.width,
        "channels": stream.channels,
        "events": stream.count,
        "event_width_bits": stream.event_bits,
        "payload_bits": stream.payload_bits,
        "dense_bits": stream.height * stream.width * stream.channels,
        "compression_ratio": _fraction_to_float(ratio) if ratio is not None else None,
    }
    return stats, stream
