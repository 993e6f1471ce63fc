"""Request and response models for the accelerator-modeling service."""
from __future__ import annotations

from typing import Optional, Union

from pydantic import BaseModel, Field


class ConfigPayload(BaseModel):
    """A model definition: either a JSON config document or a compact
    model string such as "28x28 16c3-32c3-p2-32c3-p2-fc10"."""

    config: Union[dict, str]
    timesteps: Optional[int] = Field(default=None, ge=1)
    encode_first_conv: Optional[bool] = None


class LayerShape(BaseModel):
    layer: str
    height: int
    width: int
    channels: int


class ConfigSummary(BaseModel):
    input_height: int
    input_width: int
    input_channels: int
    timesteps: int
    encode_first_conv: bool
    layers: list[str]
    shapes: list[LayerShape]


class CostRequest(ConfigPayload):
    pass


class CostLayerRow(BaseModel):
    layer: str
    mode: str
    c_in: int
    c_out: int
    h_out: int
    w_out: int
    input_reads: int
    weight_reads: int
    psum_accesses: int
    vmem_bytes: float
    parallel_factor: int
    latency_cycles: int


class CostResponse(BaseModel):
    timesteps: int
    layers: list[CostLayerRow]
    total_vmem_bytes: float
    total_vmem_kb: float
    energy_proxy: float
    bottleneck_cycles: int


class CompareDataflowRow(BaseModel):
    layer: str
    os_input_reads: int
    os_weight_reads: int
    os_psum_accesses: int
    ws_input_reads: int
    ws_weight_reads: int
    ws_psum_accesses: int
    os_over_ws_weight_ratio: float


class CompareDataflowResponse(BaseModel):
    timesteps: int
    layers: list[CompareDataflowRow]


class SearchParallelRequest(ConfigPayload):
    pe_budget: int = Field(ge=1)


class SearchParallelRow(BaseModel):
    layer: str
    factor: int
    latency_cycles: int
    latency_cycles_p1: int


class SearchParallelResponse(BaseModel):
    pe_budget: int
    factors: list[int]
    pe_used: int
    layers: list[SearchParallelRow]
    bottleneck_before: int
    bottleneck_after: int
    speedup: float


class PipelineStage(BaseModel):
    label: str
    service_cycles: int = Field(ge=1)
    units_in: int = Field(default=1, ge=1)
    units_out: int = Field(default=1, ge=1)
    capacity: Optional[int] = Field(default=None, ge=1)


class PipelineRequest(BaseModel):
    """Simulate either explicit stages or a config's convolution chain."""

    config: Optional[Union[dict, str]] = None
    timesteps: Optional[int] = None
    stages: Optional[list[PipelineStage]] = None
    frames: int = Field(default=1, ge=1)
    capacities: Optional[list[int]] = None
    per_pixel: bool = False
    size_buffers: bool = False
    include_trace: bool = True


class PipelineTraceRow(BaseModel):
    frame: int
    stage: str
    start: int
    finish: int


class PipelineResponse(BaseModel):
    frames: int
    granularity: str
    stages: list[PipelineStage]
    makespan: int
    avg_latency: float
    model_makespan: int
    abs_gap: int
    rel_gap: float
    capacity_limited: bool
    max_occupancy: list[int]
    trace: Optional[list[PipelineTraceRow]] = None
    sized_capacities: Optional[list[int]] = None


class InferRequest(ConfigPayload):
    weights_path: str
    images_path: str
    labels_path: Optional[str] = None
    limit: Optional[int] = Field(default=None, ge=1)
    dump_events_dir: Optional[str] = None


class SfrRow(BaseModel):
    layer: str
    sfr: float


class InferResponse(BaseModel):
    images: int
    timesteps: int
    accuracy: Optional[float]
    correct: Optional[int]
    per_layer_sfr: list[SfrRow]
    predictions: list[int]


class EncodeRequest(ConfigPayload):
    weights_path: str
    images_path: str
    image_index: int = Field(default=0, ge=0)


class EncodeResponse(BaseModel):
    height: int
    width: int
    channels: int
    events: int
    event_width_bits: int
    payload_bits: int
    dense_bits: int
    compression_ratio: Optional[float]
    stream_base64: str


class ErrorRecord(BaseModel):
    code: str
    message: str
