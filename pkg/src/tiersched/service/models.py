"""Pydantic request/response models for the scheduling service."""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

WorkerId = Literal["device", "edge", "cloud"]


class LayerDoc(BaseModel):
    index: int
    kind: Literal["conv", "dense", "pool", "activation"]
    input_elems: int
    output_elems: int
    flops_forward: int
    param_count: int


class ModelDoc(BaseModel):
    name: str
    sample_bytes: int
    layers: list[LayerDoc]


class WorkerTimesDoc(BaseModel):
    forward: list[float]
    backward: list[float]
    update: list[float]


class ProfileDoc(BaseModel):
    """The on-disk profile document, verbatim."""

    model: ModelDoc
    times: dict[WorkerId, WorkerTimesDoc]


class MappingDoc(BaseModel):
    worker_o: WorkerId
    worker_s: WorkerId
    worker_l: WorkerId


class PolicyDoc(BaseModel):
    mapping: MappingDoc
    m_s: int
    m_l: int
    b_o: int
    b_s: int
    b_l: int


class WorkerRateDoc(BaseModel):
    compute_rate: float = Field(gt=0)
    update_rate: float = Field(gt=0)


class SynthesizeRequest(BaseModel):
    """Either a named architecture or an inline model description."""

    arch: str | None = None
    model_spec: ModelDoc | None = None
    rates: dict[WorkerId, WorkerRateDoc] | None = None


class OptimizeRequest(BaseModel):
    profile: ProfileDoc
    bw_device_edge: float = Field(gt=0)
    bw_edge_cloud: float = Field(gt=0)
    batch: int = Field(default=128, ge=1)
    inner_solver: Literal["exact", "relax_round"] = "exact"


class MappingBestDoc(BaseModel):
    mapping: MappingDoc
    policy: PolicyDoc
    seconds: float


class SearchStatsDoc(BaseModel):
    triples: int
    evaluations: int


class OptimizeResponse(BaseModel):
    best: PolicyDoc
    best_time: float
    per_mapping_best: list[MappingBestDoc]
    search_stats: SearchStatsDoc


class SimulateRequest(BaseModel):
    profile: ProfileDoc
    policy: PolicyDoc
    bw_device_edge: float = Field(gt=0)
    bw_edge_cloud: float = Field(gt=0)
    batch: int = Field(ge=1)


class EventDoc(BaseModel):
    phase: str
    kind: str
    src: str
    dst: str
    start_s: float
    duration_s: float
    payload_bytes: int
    layers: str
    samples: int


class SimulateResponse(BaseModel):
    makespan: float
    model_total: float
    relative_gap: float
    events: list[EventDoc]


class ScenarioDoc(BaseModel):
    """Sweep configuration; scalars are promoted to one-element lists."""

    bw_device_edge: float | list[float] | None = None
    bw_edge_cloud: float | list[float] | None = None
    batch: int | None = None
    methods: list[str] | None = None
    jalad_c_bits: int | None = None
    inner_solver: str | None = None
    edge_core_scale: float | list[float] | None = None
    simulate: bool | None = None


class SweepRequest(BaseModel):
    profile: ProfileDoc
    scenario: ScenarioDoc = ScenarioDoc()


class ResultRowDoc(BaseModel):
    method: str
    bw_de: float
    bw_ec: float
    edge_scale: float
    B: int
    mapping: str
    m_s: int
    m_l: int
    b_o: int
    b_s: int
    b_l: int
    t_total_model: float
    t_total_sim: float | None
    speedup_vs_all_cloud: float
    speedup_vs_all_edge: float


class SweepResponse(BaseModel):
    rows: list[ResultRowDoc]
    csv: str


class HealthResponse(BaseModel):
    status: str
    version: str
