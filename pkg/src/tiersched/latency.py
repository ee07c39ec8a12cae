"""Closed-form per-iteration training time for a scheduling policy.

One iteration is three barrier-synchronized phases: forward, backward and
weight update.  Three roles take part: worker_o trains the full chain on b_o
samples, worker_s trains layers 1..m_s on b_s samples and worker_l trains
layers 1..m_l on b_l samples (m_s <= m_l <= N).  Each phase term is a max
over the workers active in it; the total is the sum of the phase terms.

The evaluator is written once over abstract scalars so that the scheduler can
run it on numpy arrays of candidate allocations and obtain bit-identical
values to a scalar `total_time` call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError
from .profiles import (BYTES_PER_PARAM, WORKER_IDS, CostProfile, NetworkSpec)

ROLE_IDS = ("o", "s", "l")


@dataclass(frozen=True)
class RoleMapping:
    """Assignment of the three roles to the three physical workers."""

    worker_o: str
    worker_s: str
    worker_l: str

    def __post_init__(self):
        if sorted((self.worker_o, self.worker_s, self.worker_l)) != sorted(WORKER_IDS):
            raise ValidationError(
                "mapping must be a permutation of "
                f"{WORKER_IDS}, got ({self.worker_o}, {self.worker_s}, {self.worker_l})")

    def as_tuple(self) -> tuple[str, str, str]:
        return (self.worker_o, self.worker_s, self.worker_l)


@dataclass(frozen=True)
class Policy:
    """A complete scheduling decision: role mapping, split points, allocation."""

    mapping: RoleMapping
    m_s: int
    m_l: int
    b_o: int
    b_s: int
    b_l: int

    def __post_init__(self):
        for name in ("m_s", "m_l", "b_o", "b_s", "b_l"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ValidationError(f"{name} must be a nonnegative integer")
        if self.m_s > self.m_l:
            raise ValidationError(
                f"m_s must be <= m_l, got m_s={self.m_s} m_l={self.m_l}")
        batch = self.b_o + self.b_s + self.b_l
        if self.b_s > self.m_s * batch:
            raise ValidationError(
                f"b_s={self.b_s} violates b_s <= m_s*B with m_s={self.m_s} B={batch}")
        if self.b_l > self.m_l * batch:
            raise ValidationError(
                f"b_l={self.b_l} violates b_l <= m_l*B with m_l={self.m_l} B={batch}")

    @property
    def batch(self) -> int:
        return self.b_o + self.b_s + self.b_l


@dataclass(frozen=True)
class LatencyBreakdown:
    """Per-phase modeled times; t_total is their sum."""

    t_input_o: float
    t_input_s: float
    t_input_l: float
    t_fwd1: float
    t_fwd2: float
    t_fwd3: float
    t_bwd1: float
    t_bwd2: float
    t_bwd3: float
    t_update: float
    t_total: float

    def phase_sum(self) -> float:
        """Recompute the total in the canonical summation order."""
        return (self.t_fwd1 + self.t_bwd1 + self.t_fwd2 + self.t_bwd2
                + self.t_fwd3 + self.t_bwd3 + self.t_update)


def _comm(data_bytes, bandwidth_bits_per_s):
    # the one place the bytes->bits conversion lives
    return 8.0 * data_bytes / bandwidth_bits_per_s


def comm_time(data_bytes, bandwidth_bits_per_s):
    """Transfer latency: data is stored in bytes, links are bits/second.

    Accepts scalars or numpy arrays for `data_bytes`.  An infinite bandwidth
    (co-located endpoints) yields zero.
    """
    if not bandwidth_bits_per_s > 0:
        raise ValidationError(
            f"bandwidth must be > 0, got {bandwidth_bits_per_s}")
    return _comm(data_bytes, bandwidth_bits_per_s)


def path_bandwidth(worker_a: str, worker_b: str, net: NetworkSpec) -> float:
    """Effective bandwidth between two workers.

    device-edge and edge-cloud are physical links; device-cloud traffic
    traverses both, so it is bottlenecked at the slower one.  Identical
    endpoints communicate at infinite bandwidth (zero transfer time).
    """
    for w in (worker_a, worker_b):
        if w not in WORKER_IDS:
            raise ValidationError(f"unknown worker id {w!r}")
    if worker_a == worker_b:
        return math.inf
    pair = {worker_a, worker_b}
    if pair == {"device", "edge"}:
        return net.bw_device_edge
    if pair == {"edge", "cloud"}:
        return net.bw_edge_cloud
    return min(net.bw_device_edge, net.bw_edge_cloud)


def _check_range(profile: CostProfile, first_layer: int, last_layer: int):
    n = profile.num_layers
    if first_layer < 1 or last_layer > n or first_layer > last_layer + 1:
        raise ValidationError(
            f"layer range {first_layer}..{last_layer} outside 1..{n}")


def _segment_sum(row: tuple[float, ...], first_layer: int, last_layer: int) -> float:
    # left-to-right accumulation; the scheduler relies on reproducing it
    total = 0.0
    for i in range(first_layer, last_layer + 1):
        total = total + row[i - 1]
    return total


def compute_time(profile: CostProfile, worker: str, first_layer: int,
                 last_layer: int, samples, phase: str):
    """Computation latency of `samples` through an inclusive layer range.

    Proportional to the sample count; an empty range (first > last)
    contributes zero.
    """
    if worker not in WORKER_IDS:
        raise ValidationError(f"unknown worker id {worker!r}")
    if phase == "forward":
        table = profile.forward_time
    elif phase == "backward":
        table = profile.backward_time
    else:
        raise ValidationError(f"phase must be forward or backward, got {phase!r}")
    _check_range(profile, first_layer, last_layer)
    return samples * _segment_sum(table[worker], first_layer, last_layer)


def _weight_message_bytes(profile: CostProfile, up_to_layer: int) -> int:
    # one direction: gradients (or updated weights) of layers 1..up_to_layer
    total = 0
    for i in range(1, up_to_layer + 1):
        total += BYTES_PER_PARAM * profile.param_counts[i - 1]
    return total


@dataclass(frozen=True)
class _PhaseTerms:
    """Pre-resolved constants of the phase formulas for one (mapping, m_s, m_l).

    Everything that does not depend on the sample allocation is folded here;
    `_eval_phases` then evaluates the allocation-dependent parts and works
    identically on scalars and numpy arrays.
    """

    sample_bytes: int
    bw_in_o: float
    bw_in_s: float
    bw_in_l: float
    bw_os: float
    bw_ol: float
    handoff_s_bytes: float   # per-sample activation payload at m_s (0 if m_s=0)
    handoff_l_bytes: float
    fwd1_o: float
    fwd1_s: float
    fwd1_l: float
    bwd1_o: float
    bwd1_s: float
    bwd1_l: float
    fwd2_o: float
    fwd2_l: float
    bwd2_o: float
    bwd2_l: float
    t_fwd3: float
    t_bwd3: float
    t_update: float


def _phase_terms(profile: CostProfile, net: NetworkSpec, mapping: RoleMapping,
                 m_s: int, m_l: int, batch: int,
                 activation_scale: float = 1.0) -> _PhaseTerms:
    n = profile.num_layers
    if not (0 <= m_s <= m_l <= n):
        raise ValidationError(
            f"split points must satisfy 0 <= m_s <= m_l <= {n}, "
            f"got m_s={m_s} m_l={m_l}")
    o, s, l = mapping.as_tuple()
    fwd, bwd, upd = profile.forward_time, profile.backward_time, profile.update_time
    bw_os = path_bandwidth(o, s, net)
    bw_ol = path_bandwidth(o, l, net)

    u_o = _segment_sum(upd[o], 1, n)
    u_s = _segment_sum(upd[s], 1, m_s)
    u_l = _segment_sum(upd[l], 1, m_l)
    wg_s = comm_time(2 * _weight_message_bytes(profile, m_s), bw_os) if m_s else 0.0
    wg_l = comm_time(2 * _weight_message_bytes(profile, m_l), bw_ol) if m_l else 0.0

    return _PhaseTerms(
        sample_bytes=profile.model.sample_bytes,
        bw_in_o=path_bandwidth("device", o, net),
        bw_in_s=path_bandwidth("device", s, net),
        bw_in_l=path_bandwidth("device", l, net),
        bw_os=bw_os,
        bw_ol=bw_ol,
        handoff_s_bytes=(profile.output_bytes[m_s - 1] * activation_scale
                         if m_s else 0.0),
        handoff_l_bytes=(profile.output_bytes[m_l - 1] * activation_scale
                         if m_l else 0.0),
        fwd1_o=_segment_sum(fwd[o], 1, m_s),
        fwd1_s=_segment_sum(fwd[s], 1, m_s),
        fwd1_l=_segment_sum(fwd[l], 1, m_s),
        bwd1_o=_segment_sum(bwd[o], 1, m_s),
        bwd1_s=_segment_sum(bwd[s], 1, m_s),
        bwd1_l=_segment_sum(bwd[l], 1, m_s),
        fwd2_o=_segment_sum(fwd[o], m_s + 1, m_l),
        fwd2_l=_segment_sum(fwd[l], m_s + 1, m_l),
        bwd2_o=_segment_sum(bwd[o], m_s + 1, m_l),
        bwd2_l=_segment_sum(bwd[l], m_s + 1, m_l),
        t_fwd3=batch * _segment_sum(fwd[o], m_l + 1, n),
        t_bwd3=batch * _segment_sum(bwd[o], m_l + 1, n),
        t_update=max(u_o, u_s, u_l) + max(wg_s, wg_l),
    )


def _eval_phases(c: _PhaseTerms, b_o, b_s, b_l, mx=max):
    """Evaluate the allocation-dependent phase terms.

    `b_*` may be scalars or numpy arrays; pass `mx=numpy.maximum` for arrays.
    Returns (in_o, in_s, in_l, t_fwd1, t_bwd1, t_fwd2, t_bwd2, t_total).
    """
    q = c.sample_bytes
    in_o = _comm(b_o * q, c.bw_in_o)
    in_s = _comm(b_s * q, c.bw_in_s)
    in_l = _comm(b_l * q, c.bw_in_l)
    out_s = _comm(b_s * c.handoff_s_bytes, c.bw_os)
    out_l = _comm(b_l * c.handoff_l_bytes, c.bw_ol)

    t_fwd1 = mx(mx(in_o + b_o * c.fwd1_o,
                   in_s + b_s * c.fwd1_s + out_s),
                in_l + b_l * c.fwd1_l)
    t_bwd1 = mx(mx(b_o * c.bwd1_o,
                   b_s * c.bwd1_s + out_s),
                b_l * c.bwd1_l)
    joint = b_o + b_s
    t_fwd2 = mx(joint * c.fwd2_o, b_l * c.fwd2_l + out_l)
    t_bwd2 = mx(joint * c.bwd2_o, b_l * c.bwd2_l + out_l)
    t_total = (t_fwd1 + t_bwd1 + t_fwd2 + t_bwd2
               + c.t_fwd3 + c.t_bwd3 + c.t_update)
    return in_o, in_s, in_l, t_fwd1, t_bwd1, t_fwd2, t_bwd2, t_total


def validate_policy(policy: Policy, profile: CostProfile, batch: int) -> None:
    """Check a policy against a profile and batch size."""
    if policy.m_l > profile.num_layers:
        raise ValidationError(
            f"m_l={policy.m_l} exceeds model depth {profile.num_layers}")
    if policy.batch != batch:
        raise ValidationError(
            f"allocation sums to {policy.batch}, expected batch {batch}")


def update_phase_time(policy: Policy, profile: CostProfile,
                      net: NetworkSpec) -> float:
    """Weight-update phase: slowest local update plus slowest weight exchange.

    Each helper sends its gradient sums to worker_o and receives the averaged
    result, a round trip of 4 bytes per parameter each way over its link.
    """
    validate_policy(policy, profile, policy.batch)
    c = _phase_terms(profile, net, policy.mapping, policy.m_s, policy.m_l,
                     policy.batch)
    return c.t_update


def total_time(policy: Policy, profile: CostProfile, net: NetworkSpec,
               batch: int) -> LatencyBreakdown:
    """Modeled time of one training iteration under `policy`.

    Forward phase 1 runs layers 1..m_s on all three workers (each behind its
    own input transfer, worker_s also pays the activation handoff); phase 2
    runs m_s+1..m_l on worker_o (b_o+b_s samples) and worker_l; phase 3 runs
    the remaining layers on worker_o alone with the full batch.  The backward
    phases mirror this with the intermediate-gradient transfers costed like
    the forward handoffs.
    """
    validate_policy(policy, profile, batch)
    c = _phase_terms(profile, net, policy.mapping, policy.m_s, policy.m_l, batch)
    in_o, in_s, in_l, t_fwd1, t_bwd1, t_fwd2, t_bwd2, t_total = _eval_phases(
        c, policy.b_o, policy.b_s, policy.b_l)
    return LatencyBreakdown(
        t_input_o=in_o,
        t_input_s=in_s,
        t_input_l=in_l,
        t_fwd1=t_fwd1,
        t_fwd2=t_fwd2,
        t_fwd3=c.t_fwd3,
        t_bwd1=t_bwd1,
        t_bwd2=t_bwd2,
        t_bwd3=c.t_bwd3,
        t_update=c.t_update,
        t_total=t_total,
    )
