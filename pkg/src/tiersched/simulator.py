"""Barrier-synchronized replay of one training iteration.

The simulator emits timestamped compute and transfer events mirroring the
three-phase procedure (forward, backward, weight update), with the same
barrier structure the closed-form model assumes: within a barrier group each
worker chains its own events (input transfer, then compute, then handoff),
and the next group starts when the slowest chain finishes.  The resulting
makespan therefore reproduces the modeled total to floating-point accuracy,
which is the model-validation check.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError
from .latency import (Policy, comm_time, compute_time, path_bandwidth,
                      validate_policy)
from .profiles import BYTES_PER_PARAM, CostProfile, NetworkSpec

# Temporal order of phases; backward runs deepest layers first.
PHASES = ("input", "fwd1", "fwd2", "fwd3", "bwd3", "bwd2", "bwd1",
          "gradpush", "weightpull", "update")
_PHASE_INDEX = {p: i for i, p in enumerate(PHASES)}

# Phases sharing a barrier group run concurrently (per-worker chains);
# a group must fully finish before the next one starts.
BARRIER_GROUPS = (("input", "fwd1"), ("fwd2",), ("fwd3",), ("bwd3",),
                  ("bwd2",), ("bwd1",), ("gradpush", "weightpull"),
                  ("update",))

EVENT_KINDS = ("transfer", "compute", "barrier")


@dataclass(frozen=True)
class Event:
    kind: str
    phase: str
    src: str
    dst: str | None
    start: float
    duration: float
    payload_bytes: int
    layers: tuple[int, int] | None
    samples: int

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class EventTrace:
    events: tuple[Event, ...]
    makespan: float


def simulate_iteration(policy: Policy, profile: CostProfile,
                       net: NetworkSpec, batch: int) -> EventTrace:
    """Replay one iteration under `policy` and return the event trace."""
    validate_policy(policy, profile, batch)
    n = profile.num_layers
    o, s, l = policy.mapping.as_tuple()
    m_s, m_l = policy.m_s, policy.m_l
    b_o, b_s, b_l = policy.b_o, policy.b_s, policy.b_l
    q = profile.model.sample_bytes
    events: list[Event] = []

    def transfer(phase, src, dst, start, payload, layers, samples):
        dur = comm_time(payload, path_bandwidth(src, dst, net))
        if payload > 0 and src != dst:
            events.append(Event("transfer", phase, src, dst, start, dur,
                                payload, layers, samples))
        return dur

    def compute(phase, worker, start, lo, hi, samples, direction):
        dur = compute_time(profile, worker, lo, hi, samples, direction)
        if samples > 0 and lo <= hi:
            events.append(Event("compute", phase, worker, None, start, dur,
                                0, (lo, hi), samples))
        return dur

    t = 0.0

    # --- input + forward over layers 1..m_s (all three workers) -----------
    ends = []
    for worker, b in ((o, b_o), (s, b_s), (l, b_l)):
        in_dur = transfer("input", "device", worker, t, b * q, None, b)
        end = t + in_dur + compute("fwd1", worker, t + in_dur, 1, m_s, b,
                                   "forward")
        if worker == s and m_s >= 1:
            end += transfer("fwd1", s, o, end,
                            b_s * profile.output_bytes[m_s - 1], (m_s, m_s),
                            b_s)
        ends.append(end)
    t = max(ends)

    # --- forward over layers m_s+1..m_l (worker_o and worker_l); worker_l
    #     hands its output of layer m_l to worker_o even when the range is
    #     empty (m_s == m_l), since its phase-1 output still must reach o ---
    end_o = t + compute("fwd2", o, t, m_s + 1, m_l, b_o + b_s, "forward")
    end_l = t + compute("fwd2", l, t, m_s + 1, m_l, b_l, "forward")
    if m_l >= 1:
        end_l += transfer("fwd2", l, o, end_l,
                          b_l * profile.output_bytes[m_l - 1], (m_l, m_l), b_l)
    t = max(end_o, end_l)

    # --- forward tail and full backward on worker_o ------------------------
    t += compute("fwd3", o, t, m_l + 1, n, batch, "forward")
    t += compute("bwd3", o, t, m_l + 1, n, batch, "backward")

    # --- backward over m_l..m_s+1: worker_o, and worker_l behind its
    #     intermediate-gradient transfer -----------------------------------
    end_o = t + compute("bwd2", o, t, m_s + 1, m_l, b_o + b_s, "backward")
    end_l = t
    if m_l >= 1:
        grad = transfer("bwd2", o, l, t, b_l * profile.output_bytes[m_l - 1],
                        (m_l, m_l), b_l)
        end_l = t + grad + compute("bwd2", l, t + grad, m_s + 1, m_l, b_l,
                                   "backward")
    t = max(end_o, end_l)

    # --- backward over m_s..1 (all three workers) --------------------------
    end_o = t + compute("bwd1", o, t, 1, m_s, b_o, "backward")
    end_s = t
    if m_s >= 1:
        grad = transfer("bwd1", o, s, t, b_s * profile.output_bytes[m_s - 1],
                        (m_s, m_s), b_s)
        end_s = t + grad + compute("bwd1", s, t + grad, 1, m_s, b_s,
                                   "backward")
    end_l = t + compute("bwd1", l, t, 1, m_s, b_l, "backward")
    t = max(end_o, end_s, end_l)

    # --- weight exchange: gradient push then averaged-weight pull ----------
    ends = [t]
    for worker, m in ((s, m_s), (l, m_l)):
        if m >= 1:
            payload = BYTES_PER_PARAM * sum(profile.param_counts[:m])
            push = transfer("gradpush", worker, o, t, payload, (1, m), 0)
            pull = transfer("weightpull", o, worker, t + push, payload,
                            (1, m), 0)
            ends.append(t + push + pull)
    t = max(ends)

    # --- local weight updates ----------------------------------------------
    ends = [t]
    for worker, m in ((o, n), (s, m_s), (l, m_l)):
        if m >= 1:
            dur = sum(profile.update_time[worker][:m])
            events.append(Event("compute", "update", worker, None, t, dur,
                                0, (1, m), 0))
            ends.append(t + dur)
    t = max(ends)

    return EventTrace(events=tuple(events), makespan=t)


def trace_to_rows(trace: EventTrace) -> list[tuple]:
    """Tabular view of a trace: one row per event.

    Columns: (phase, kind, src, dst, start_s, duration_s, payload_bytes,
    layers, samples); rows ordered by start time, then phase order, then
    endpoints for determinism.
    """
    rows = []
    for e in sorted(trace.events,
                    key=lambda e: (e.start, _PHASE_INDEX[e.phase], e.kind,
                                   e.src, e.dst or "")):
        layers = f"{e.layers[0]}-{e.layers[1]}" if e.layers else ""
        rows.append((e.phase, e.kind, e.src, e.dst or "", e.start,
                     e.duration, e.payload_bytes, layers, e.samples))
    return rows


TRACE_COLUMNS = ("phase", "kind", "src", "dst", "start_s", "duration_s",
                 "payload_bytes", "layers", "samples")
