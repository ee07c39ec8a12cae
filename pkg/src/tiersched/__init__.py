"""Scheduling optimizer, latency model and simulator for hybrid-parallel
DNN training across a device / edge-server / cloud hierarchy."""

from .errors import ConfigError, SchemaError, TierschedError, ValidationError
from .latency import (LatencyBreakdown, Policy, RoleMapping, comm_time,
                      compute_time, path_bandwidth, total_time,
                      update_phase_time)
from .profiles import (CostProfile, LayerSpec, ModelSpec, NetworkSpec,
                       WorkerSpec, load_profile, output_bytes, param_count,
                       save_profile, synthesize_profile)
from .scheduler import (MAPPINGS, AllocationSolution, ChainSchedule,
                        ScheduleResult, SearchStats, baseline_all_on,
                        baseline_compressed_split, baseline_jointdnn,
                        baseline_jointdnn_plus, baseline_two_tier,
                        optimize, round_allocation, solve_inner_exact,
                        solve_inner_relax_round)
from .simulator import Event, EventTrace, simulate_iteration, trace_to_rows

__version__ = "0.1.0"

__all__ = [
    "AllocationSolution", "ChainSchedule", "ConfigError", "CostProfile",
    "Event", "EventTrace", "LatencyBreakdown", "LayerSpec", "MAPPINGS",
    "ModelSpec", "NetworkSpec", "Policy", "RoleMapping", "ScheduleResult",
    "SchemaError", "SearchStats", "TierschedError", "ValidationError",
    "WorkerSpec", "baseline_all_on", "baseline_compressed_split",
    "baseline_jointdnn", "baseline_jointdnn_plus", "baseline_two_tier",
    "comm_time", "compute_time", "load_profile", "optimize", "output_bytes",
    "param_count", "path_bandwidth", "round_allocation", "save_profile",
    "simulate_iteration", "solve_inner_exact", "solve_inner_relax_round",
    "synthesize_profile", "total_time", "trace_to_rows", "update_phase_time",
]
