"""FastAPI service exposing the simulator and the cost models.

Every endpoint accepts a config either as a JSON document or as a compact
model string; weights and image data are referenced by path, so the
service is meant to run next to the data it evaluates. Errors surface as
HTTP 400/404 with a machine-readable {"error": {code, message}} record.
"""
from __future__ import annotations

import base64
import dataclasses

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import costmodel, experiments, idx, pipesim, stiw
from ..codec import CorruptStreamError
from ..core import ConfigError, DegenerateInputError, ShapeError
from ..netconfig import NetworkConfig, config_from_dict, parse_config
from . import schemas

app = FastAPI(
    title="snnaccel",
    description="Functional simulation and cost modeling of a "
                "single-timestep spiking CNN accelerator",
    version="0.1.0",
)

async def _not_found(request: Request, exc: Exception):
    record = schemas.ErrorRecord(code="not_found", message=str(exc))
    return JSONResponse(status_code=404, content={"error": record.model_dump()})


async def _bad_request(request: Request, exc: Exception):
    record = schemas.ErrorRecord(code=type(exc).__name__, message=str(exc))
    return JSONResponse(status_code=400, content={"error": record.model_dump()})


app.add_exception_handler(FileNotFoundError, _not_found)
for _exc in (ConfigError, ShapeError, DegenerateInputError, CorruptStreamError,
             stiw.WeightFileError, idx.IdxError, ValueError, KeyError):
    app.add_exception_handler(_exc, _bad_request)


def _resolve_config(payload: schemas.ConfigPayload) -> NetworkConfig:
    raw = payload.config
    if isinstance(raw, dict):
        cfg = config_from_dict(raw, encode_first_conv=payload.encode_first_conv,
                               timesteps=payload.timesteps)
    else:
        cfg = parse_config(raw, encode_first_conv=payload.encode_first_conv)
        if payload.timesteps is not None:
            cfg.timesteps = payload.timesteps
    if payload.timesteps is not None:
        cfg.timesteps = payload.timesteps
    return cfg


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "service": "snnaccel", "version": app.version}


@app.post("/config/validate", response_model=schemas.ConfigSummary)
def validate_config(payload: schemas.ConfigPayload):
    cfg = _resolve_config(payload)
    shapes = cfg.layer_shapes()
    rows = [schemas.LayerShape(layer="input", height=shapes[0][0],
                               width=shapes[0][1], channels=shapes[0][2])]
    for i, (spec, (h, w, c)) in enumerate(zip(cfg.layers, shapes[1:])):
        rows.append(schemas.LayerShape(layer=f"l{i:02d}_{spec.mode.value}",
                                       height=h, width=w, channels=c))
    return schemas.ConfigSummary(
        input_height=cfg.input_height, input_width=cfg.input_width,
        input_channels=cfg.input_channels, timesteps=cfg.timesteps,
        encode_first_conv=cfg.encode_first_conv,
        layers=[spec.mode.value for spec in cfg.layers],
        shapes=rows,
    )


@app.post("/cost", response_model=schemas.CostResponse)
def cost(payload: schemas.CostRequest):
    cfg = _resolve_config(payload)
    return experiments.cost_report(cfg)


@app.post("/compare-dataflow", response_model=schemas.CompareDataflowResponse)
def compare_dataflow(payload: schemas.ConfigPayload):
    cfg = _resolve_config(payload)
    return experiments.compare_dataflow_report(cfg)


@app.post("/search-parallel", response_model=schemas.SearchParallelResponse)
def search_parallel(payload: schemas.SearchParallelRequest):
    cfg = _resolve_config(payload)
    return experiments.search_parallel_report(cfg, payload.pe_budget)


@app.post("/pipeline", response_model=schemas.PipelineResponse)
def pipeline(payload: schemas.PipelineRequest):
    if payload.stages:
        stages = [pipesim.StageModel(s.label, s.service_cycles, s.units_in,
                                     s.units_out, s.capacity)
                  for s in payload.stages]
        if payload.capacities:
            stages = [pipesim.StageModel(s.label, s.service_cycles, s.units_in,
                                         s.units_out, c)
                      for s, c in zip(stages, payload.capacities)]
        per_pixel = any(s.units_in != 1 or s.units_out != 1 for s in stages)
        trace = pipesim.simulate_units(stages, payload.frames) if per_pixel \
            else pipesim.simulate(stages, payload.frames)
        analytical = costmodel.pipeline_latency(
            [s.service_cycles * s.units_out for s in stages], payload.frames)
        cmp = pipesim.compare_to_model(trace, analytical)
        report = {
            "frames": payload.frames,
            "granularity": "pixel" if per_pixel else "frame",
            "stages": [dataclasses.asdict(s) for s in stages],
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
                for f in range(payload.frames) for s in range(len(stages))
            ],
        }
        if payload.size_buffers:
            report["sized_capacities"] = pipesim.size_fifos(stages, payload.frames)
    else:
        if payload.config is None:
            raise ConfigError("pipeline needs either stages or a config")
        cfg = _resolve_config(schemas.ConfigPayload(
            config=payload.config, timesteps=payload.timesteps))
        report = experiments.pipeline_report(
            cfg, payload.frames, capacities=payload.capacities,
            per_pixel=payload.per_pixel, size_buffers=payload.size_buffers)
    if not payload.include_trace:
        report["trace"] = None
    return report


@app.post("/infer", response_model=schemas.InferResponse)
def infer(payload: schemas.InferRequest):
    cfg = _resolve_config(payload)
    weight_layers = stiw.load_weights(payload.weights_path, cfg)
    images = idx.load_idx(payload.images_path)
    labels = idx.load_idx(payload.labels_path) if payload.labels_path else None
    return experiments.run_inference(
        cfg, weight_layers, images, labels=labels, limit=payload.limit,
        dump_events_dir=payload.dump_events_dir)


@app.post("/encode", response_model=schemas.EncodeResponse)
def encode(payload: schemas.EncodeRequest):
    cfg = _resolve_config(payload)
    weight_layers = stiw.load_weights(payload.weights_path, cfg)
    images = idx.load_idx(payload.images_path)
    if payload.image_index >= images.shape[0]:
        raise ConfigError(
            f"image index {payload.image_index} out of range "
            f"({images.shape[0]} images)")
    stats, stream = experiments.encode_report(cfg, weight_layers,
                                              images[payload.image_index])
    stats["stream_base64"] = base64.b64encode(stream.to_bytes()).decode("ascii")
    return stats
