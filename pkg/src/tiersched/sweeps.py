"""Experiment grids: evaluate scheduling methods over bandwidth and
edge-capability sweeps and emit deterministic result rows.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

from .errors import ConfigError
from .latency import Policy, total_time
from .profiles import CostProfile, NetworkSpec, scale_worker_compute
from .scheduler import (ChainSchedule, baseline_all_on,
                        baseline_compressed_split, baseline_jointdnn,
                        baseline_jointdnn_plus, optimize)
from .simulator import simulate_iteration

METHODS = ("hiertrain", "all_edge", "all_cloud", "all_device",
           "jointdnn", "jointdnn_plus", "jalad")

# Paper-shaped default grid: device-edge fixed at 5 Mbps, edge-cloud swept
# from 1.5 to 5 Mbps in 0.5 Mbps steps.
DEFAULT_BW_DEVICE_EDGE = (5.0e6,)
DEFAULT_BW_EDGE_CLOUD = (1.5e6, 2.0e6, 2.5e6, 3.0e6, 3.5e6, 4.0e6, 4.5e6, 5.0e6)

RESULT_HEADER = ("method,bw_de,bw_ec,edge_scale,B,mapping,m_s,m_l,b_o,b_s,b_l,"
                 "t_total_model,t_total_sim,speedup_vs_all_cloud,"
                 "speedup_vs_all_edge")


@dataclass(frozen=True)
class ScenarioConfig:
    bw_device_edge: tuple[float, ...] = DEFAULT_BW_DEVICE_EDGE
    bw_edge_cloud: tuple[float, ...] = DEFAULT_BW_EDGE_CLOUD
    batch: int = 128
    methods: tuple[str, ...] = METHODS
    jalad_c_bits: int = 8
    inner_solver: str = "exact"
    edge_core_scale: tuple[float, ...] = (1.0,)
    simulate: bool = True

    def __post_init__(self):
        for name in ("bw_device_edge", "bw_edge_cloud", "edge_core_scale"):
            values = getattr(self, name)
            if not values:
                raise ConfigError(f"{name} must be a nonempty list")
            if any(not v > 0 for v in values):
                raise ConfigError(f"{name} entries must be > 0")
        if self.batch < 1:
            raise ConfigError("batch must be >= 1")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown or not self.methods:
            raise ConfigError(
                f"methods must be a nonempty subset of {METHODS}, "
                f"got {list(self.methods)}")
        if not isinstance(self.jalad_c_bits, int) or not (1 <= self.jalad_c_bits <= 32):
            raise ConfigError("jalad_c_bits must be an integer in 1..32")
        if self.inner_solver not in ("exact", "relax_round"):
            raise ConfigError("inner_solver must be 'exact' or 'relax_round'")


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    """Build a config from a JSON-shaped dict, tolerating scalars for lists."""
    kwargs = {}
    listy = {"bw_device_edge", "bw_edge_cloud", "edge_core_scale"}
    known = {"bw_device_edge", "bw_edge_cloud", "batch", "methods",
             "jalad_c_bits", "inner_solver", "edge_core_scale", "simulate"}
    for key, value in doc.items():
        if key not in known:
            raise ConfigError(f"unknown scenario field {key!r}")
        if key in listy and isinstance(value, (int, float)):
            value = (float(value),)
        elif key in listy:
            value = tuple(float(v) for v in value)
        elif key == "methods":
            value = tuple(value)
        kwargs[key] = value
    return ScenarioConfig(**kwargs)


@dataclass(frozen=True)
class ResultRow:
    method: str
    bw_de: float
    bw_ec: float
    edge_scale: float
    batch: int
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


def _mapping_str(policy: Policy) -> str:
    m = policy.mapping
    return f"{m.worker_o}/{m.worker_s}/{m.worker_l}"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def rows_to_csv(rows: list[ResultRow]) -> str:
    out = io.StringIO()
    out.write(RESULT_HEADER + "\n")
    for r in rows:
        out.write(",".join(_fmt(v) for v in (
            r.method, r.bw_de, r.bw_ec, r.edge_scale, r.batch, r.mapping,
            r.m_s, r.m_l, r.b_o, r.b_s, r.b_l, r.t_total_model,
            r.t_total_sim, r.speedup_vs_all_cloud, r.speedup_vs_all_edge,
        )) + "\n")
    return out.getvalue()


def _evaluate_method(method: str, profile: CostProfile, net: NetworkSpec,
                     config: ScenarioConfig):
    """Returns (policy or chain or None, modeled seconds, simulatable)."""
    batch = config.batch
    if method == "hiertrain":
        result = optimize(profile, net, batch, inner=config.inner_solver)
        return result.best, result.best_time, True
    if method == "all_edge":
        return (*baseline_all_on(profile, net, "edge", batch), True)
    if method == "all_cloud":
        return (*baseline_all_on(profile, net, "cloud", batch), True)
    if method == "all_device":
        return (*baseline_all_on(profile, net, "device", batch), True)
    if method == "jointdnn":
        return (*baseline_jointdnn(profile, net, batch), True)
    if method == "jointdnn_plus":
        sched, t = baseline_jointdnn_plus(profile, net, batch)
        return sched, t, isinstance(sched, Policy)
    if method == "jalad":
        # modeled with compressed activations; the simulator has no
        # compression, so no simulation column for these rows
        sched, t = baseline_compressed_split(profile, net, batch,
                                             config.jalad_c_bits)
        return sched, t, False
    raise ConfigError(f"unknown method {method!r}")


def run_grid(profile: CostProfile, config: ScenarioConfig) -> list[ResultRow]:
    """Evaluate every configured method at every grid point.

    Row order is deterministic: method (declared order), then bw_de, bw_ec
    and edge_scale in their configured order.
    """
    rows = []
    for method in [m for m in METHODS if m in config.methods]:
        for bw_de in config.bw_device_edge:
            for bw_ec in config.bw_edge_cloud:
                for scale in config.edge_core_scale:
                    net = NetworkSpec(bw_de, bw_ec)
                    scaled = scale_worker_compute(profile, "edge", scale)
                    _, t_cloud = baseline_all_on(scaled, net, "cloud",
                                                 config.batch)
                    _, t_edge = baseline_all_on(scaled, net, "edge",
                                                config.batch)
                    sched, t_model, simulatable = _evaluate_method(
                        method, scaled, net, config)
                    t_sim = None
                    if config.simulate and simulatable and isinstance(sched, Policy):
                        t_sim = simulate_iteration(sched, scaled, net,
                                                   config.batch).makespan
                    if isinstance(sched, Policy):
                        mapping = _mapping_str(sched)
                        m_s, m_l = sched.m_s, sched.m_l
                        b_o, b_s, b_l = sched.b_o, sched.b_s, sched.b_l
                    else:   # three-tier chain schedule
                        mapping = "chain:device/edge/cloud"
                        m_s, m_l = (sched.split_device_edge,
                                    sched.split_edge_cloud)
                        b_o = b_s = b_l = 0
                    rows.append(ResultRow(
                        method=method, bw_de=bw_de, bw_ec=bw_ec,
                        edge_scale=scale, batch=config.batch,
                        mapping=mapping, m_s=m_s, m_l=m_l,
                        b_o=b_o, b_s=b_s, b_l=b_l,
                        t_total_model=t_model, t_total_sim=t_sim,
                        speedup_vs_all_cloud=t_cloud / t_model,
                        speedup_vs_all_edge=t_edge / t_model,
                    ))
    return rows
