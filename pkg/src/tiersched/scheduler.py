"""Policy search: enumerate role mappings and split points, optimize the
sample allocation for each, keep the global best.  Also provides the
baseline schedules used for comparison (all-on-one-worker, two-tier splits,
compressed two-tier split, three-tier chain).

Two inner solvers are available for the allocation subproblem:

* ``exact`` enumerates every integer allocation (vectorized; the objective
  values are bit-identical to scalar ``total_time`` calls), giving the true
  integer optimum.
* ``relax_round`` minimizes the continuous relaxation (the objective is
  convex piecewise-linear over the allocation simplex) by adaptive grid
  refinement, then rounds to integers by descending fractional part and
  re-evaluates exactly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ValidationError
from .latency import (Policy, RoleMapping, _eval_phases, _phase_terms,
                      _segment_sum, comm_time, compute_time, path_bandwidth,
                      total_time)
from .profiles import WORKER_IDS, CostProfile, NetworkSpec

# All six role assignments, in lexicographic order of (o, s, l) with
# device < edge < cloud; ties during the search resolve to the earliest.
MAPPINGS = tuple(RoleMapping(*perm)
                 for perm in itertools.permutations(WORKER_IDS))

INNER_SOLVERS = ("exact", "relax_round")


@dataclass(frozen=True)
class AllocationSolution:
    b_o: int
    b_s: int
    b_l: int
    objective: float


@dataclass(frozen=True)
class SearchStats:
    triples: int       # (mapping, m_s, m_l) combinations examined
    evaluations: int   # allocation objective evaluations


@dataclass(frozen=True)
class ScheduleResult:
    best: Policy
    best_time: float
    per_mapping_best: tuple[tuple[RoleMapping, Policy, float], ...]
    search_stats: SearchStats


@dataclass(frozen=True)
class ChainSchedule:
    """Sequential three-tier split: device 1..k1, edge k1+1..k2, cloud rest."""

    split_device_edge: int
    split_edge_cloud: int


@lru_cache(maxsize=32)
def _alloc_lattice(batch: int, s_free: bool, l_free: bool):
    """Feasible integer allocations as float arrays, in tie-break order.

    Ordered by descending b_o, then descending b_s, so that the first
    minimum found is the declared tie-break winner.
    """
    b_o, b_s = [], []
    for bo in range(batch, -1, -1):
        smax = (batch - bo) if s_free else 0
        for bs in range(smax, -1, -1):
            bl = batch - bo - bs
            if bl and not l_free:
                continue
            b_o.append(bo)
            b_s.append(bs)
    bo_arr = np.array(b_o, dtype=float)
    bs_arr = np.array(b_s, dtype=float)
    return bo_arr, bs_arr, batch - bo_arr - bs_arr


def solve_inner_exact(profile: CostProfile, net: NetworkSpec,
                      mapping: RoleMapping, m_s: int, m_l: int,
                      batch: int) -> AllocationSolution:
    """Integer-optimal allocation for fixed mapping and split points.

    Ties break toward larger b_o, then larger b_s.
    """
    if batch < 1:
        raise ValidationError("batch must be >= 1")
    sol, _ = _inner_exact(profile, net, mapping, m_s, m_l, batch)
    return sol


def _inner_exact(profile, net, mapping, m_s, m_l, batch):
    c = _phase_terms(profile, net, mapping, m_s, m_l, batch)
    b_o, b_s, b_l = _alloc_lattice(batch, m_s > 0, m_l > 0)
    totals = _eval_phases(c, b_o, b_s, b_l, mx=np.maximum)[-1]
    i = int(np.argmin(totals))
    sol = AllocationSolution(int(b_o[i]), int(b_s[i]), int(b_l[i]),
                             float(totals[i]))
    return sol, totals.size


def round_allocation(values: tuple[float, float, float],
                     batch: int) -> tuple[int, int, int]:
    """Round a real allocation to integers summing to `batch`.

    Components split into integer and fractional parts; the missing units
    (at most two) go to the largest fractional parts, ties broken in
    (o, s, l) order.  Every output is within one of its input.
    """
    if len(values) != 3:
        raise ValidationError("allocation must have exactly three components")
    if any(v < 0 for v in values):
        raise ValidationError("allocation components must be >= 0")
    if abs(sum(values) - batch) > 1e-9:
        raise ValidationError(
            f"allocation sums to {sum(values)!r}, expected {batch} within 1e-9")
    ints = []
    fracs = []
    for v in values:
        base = math.floor(v)
        frac = v - base
        if frac >= 1.0 - 1e-9:   # numerically integral, avoid a third increment
            base += 1
            frac = 0.0
        ints.append(int(base))
        fracs.append(frac)
    deficit = batch - sum(ints)
    if deficit < 0 or deficit > 2:
        raise ValidationError(f"rounding deficit {deficit} out of range 0..2")
    for j in sorted(range(3), key=lambda j: (-fracs[j], j))[:deficit]:
        ints[j] += 1
    return ints[0], ints[1], ints[2]


# ---------------------------------------------------------------------------
# Continuous relaxation via adaptive grid refinement
# ---------------------------------------------------------------------------

def _stack_terms(rows):
    """Stack per-row phase terms into column arrays for broadcasting."""
    import dataclasses
    fields = {}
    for f in dataclasses.fields(rows[0]):
        fields[f.name] = np.array([getattr(r, f.name) for r in rows],
                                  dtype=float).reshape(-1, 1)
    return rows[0].__class__(**fields)


def _slope_bound(rows):
    """Conservative per-row Lipschitz bound of the objective in samples."""
    out = []
    for c in rows:
        q8 = lambda bw: 8.0 * c.sample_bytes / bw
        hs = 8.0 * c.handoff_s_bytes / c.bw_os
        hl = 8.0 * c.handoff_l_bytes / c.bw_ol
        s1 = max(q8(c.bw_in_o) + c.fwd1_o, q8(c.bw_in_s) + c.fwd1_s + hs,
                 q8(c.bw_in_l) + c.fwd1_l)
        s1b = max(c.bwd1_o, c.bwd1_s + hs, c.bwd1_l)
        s2 = max(c.fwd2_o, c.fwd2_l + hl)
        s2b = max(c.bwd2_o, c.bwd2_l + hl)
        out.append(s1 + s1b + s2 + s2b)
    return np.array(out).reshape(-1, 1)


_GRID_OFFSETS = np.arange(13, dtype=float) - 6.0


def _refine_relax(rows, batch, s_free, tol):
    """Grid-refine the continuous relaxation for rows sharing one m_s.

    Returns per-row real (b_s, b_l) near-minimizers and the number of
    objective evaluations spent.
    """
    stack = _stack_terms(rows)
    n_rows = len(rows)
    slope = _slope_bound(rows)
    cs = np.full((n_rows, 1), batch / 2.0 if s_free else 0.0)
    cl = np.full((n_rows, 1), batch / 2.0)
    step = batch / 12.0
    evals = 0
    for _ in range(40):
        if s_free:
            bs_pts = np.clip(cs + _GRID_OFFSETS * step, 0.0, batch)
            bl_pts = np.clip(cl + _GRID_OFFSETS * step, 0.0, batch)
            b_s = np.repeat(bs_pts, 13, axis=1)
            b_l = np.tile(bl_pts, (1, 13))
        else:
            b_l = np.clip(cl + _GRID_OFFSETS * step, 0.0, batch)
            b_s = np.zeros_like(b_l)
        b_o = batch - b_s - b_l
        totals = _eval_phases(stack, b_o, b_s, b_l, mx=np.maximum)[-1]
        totals = np.where(b_o >= 0.0, totals, np.inf)
        evals += totals.size
        idx = np.argmin(totals, axis=1)
        rows_idx = np.arange(n_rows)
        cs = b_s[rows_idx, idx].reshape(-1, 1)
        cl = b_l[rows_idx, idx].reshape(-1, 1)
        best = totals[rows_idx, idx].reshape(-1, 1)
        if step <= 0.4 and bool(np.all(2.0 * slope * step <= tol * best)):
            break
        if step < 1e-7 * batch:
            break
        step /= 3.0
    return cs.ravel(), cl.ravel(), evals


def _inner_relax_batch(profile, net, mapping, m_s, m_l_values, batch, tol):
    """Relax-and-round solutions for all m_l values sharing one (mapping, m_s)."""
    solutions = []
    evals = 0
    m_l_values = list(m_l_values)
    if m_s == 0 and m_l_values and m_l_values[0] == 0:
        c = _phase_terms(profile, net, mapping, 0, 0, batch)
        obj = float(_eval_phases(c, batch, 0, 0)[-1])
        solutions.append(AllocationSolution(batch, 0, 0, obj))
        evals += 1
        m_l_values = m_l_values[1:]
    if not m_l_values:
        return solutions, evals
    rows = [_phase_terms(profile, net, mapping, m_s, m_l, batch)
            for m_l in m_l_values]
    bs_real, bl_real, ev = _refine_relax(rows, batch, m_s > 0, tol)
    evals += ev
    for c, bs, bl in zip(rows, bs_real, bl_real):
        b = round_allocation((batch - bs - bl, bs, bl), batch)
        obj = float(_eval_phases(c, b[0], b[1], b[2])[-1])
        evals += 1
        solutions.append(AllocationSolution(b[0], b[1], b[2], obj))
    return solutions, evals


def solve_inner_relax_round(profile: CostProfile, net: NetworkSpec,
                            mapping: RoleMapping, m_s: int, m_l: int,
                            batch: int, tol: float = 0.01) -> AllocationSolution:
    """Allocation via the continuous relaxation plus fraction rounding.

    The relaxation is solved to within `tol` (relative) of the continuous
    optimum; the rounded allocation is re-evaluated exactly, so the returned
    objective is the true modeled time of the returned integers.
    """
    if batch < 1:
        raise ValidationError("batch must be >= 1")
    if not tol > 0:
        raise ValidationError("tol must be > 0")
    sols, _ = _inner_relax_batch(profile, net, mapping, m_s, [m_l], batch, tol)
    return sols[0]


# ---------------------------------------------------------------------------
# Full search
# ---------------------------------------------------------------------------

def optimize(profile: CostProfile, net: NetworkSpec, batch: int,
             inner: str = "exact", tol: float = 0.01) -> ScheduleResult:
    """Search all 6 mappings x all split pairs for the fastest policy.

    Deterministic: mappings are scanned in their declared order, split pairs
    in ascending (m_s, m_l), and only strictly better objectives replace the
    incumbent, so equal-cost candidates resolve to the earliest.
    """
    if inner not in INNER_SOLVERS:
        raise ValidationError(f"inner solver must be one of {INNER_SOLVERS}")
    if batch < 1:
        raise ValidationError("batch must be >= 1")
    n = profile.num_layers
    triples = 0
    evaluations = 0
    per_mapping = []
    best_policy = None
    best_time = math.inf
    for mapping in MAPPINGS:
        map_policy = None
        map_time = math.inf
        for m_s in range(0, n + 1):
            m_l_values = range(m_s, n + 1)
            if inner == "exact":
                sols = []
                for m_l in m_l_values:
                    sol, ev = _inner_exact(profile, net, mapping, m_s, m_l, batch)
                    evaluations += ev
                    sols.append(sol)
            else:
                sols, ev = _inner_relax_batch(profile, net, mapping, m_s,
                                              m_l_values, batch, tol)
                evaluations += ev
            for m_l, sol in zip(m_l_values, sols):
                triples += 1
                if sol.objective < map_time:
                    map_time = sol.objective
                    map_policy = Policy(mapping, m_s, m_l,
                                        sol.b_o, sol.b_s, sol.b_l)
        per_mapping.append((mapping, map_policy, map_time))
        if map_time < best_time:
            best_time = map_time
            best_policy = map_policy
    return ScheduleResult(
        best=best_policy,
        best_time=best_time,
        per_mapping_best=tuple(per_mapping),
        search_stats=SearchStats(triples=triples, evaluations=evaluations),
    )


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def _others(worker: str) -> list[str]:
    return [w for w in WORKER_IDS if w != worker]


def baseline_all_on(profile: CostProfile, net: NetworkSpec, worker: str,
                    batch: int) -> tuple[Policy, float]:
    """Ship every sample to one worker and train there."""
    rest = _others(worker)
    policy = Policy(RoleMapping(worker, rest[0], rest[1]), 0, 0, batch, 0, 0)
    return policy, float(total_time(policy, profile, net, batch).t_total)


def _policy_cost(profile, net, policy, activation_scale):
    c = _phase_terms(profile, net, policy.mapping, policy.m_s, policy.m_l,
                     policy.batch, activation_scale=activation_scale)
    return float(_eval_phases(c, policy.b_o, policy.b_s, policy.b_l)[-1])


def baseline_two_tier(profile: CostProfile, net: NetworkSpec, front: str,
                      back: str, batch: int,
                      activation_scale: float = 1.0) -> tuple[Policy, float]:
    """Single-split schedule: `front` runs layers 1..k on the whole batch,
    `back` runs the rest; best k in 0..N.

    Encoded as the policy (worker_o=back, worker_s=front, m_s=m_l=k,
    b_s=batch); k=0 degenerates to all-on-`back`.  `activation_scale`
    shrinks the activation/gradient handoffs across the split (weight
    messages are never scaled).
    """
    if front == back:
        raise ValidationError("front and back workers must differ")
    third = [w for w in WORKER_IDS if w not in (front, back)][0]
    mapping = RoleMapping(back, front, third)
    best = None
    for k in range(0, profile.num_layers + 1):
        if k == 0:
            policy = Policy(mapping, 0, 0, batch, 0, 0)
        else:
            policy = Policy(mapping, k, k, 0, batch, 0)
        t = _policy_cost(profile, net, policy, activation_scale)
        if best is None or t < best[1]:
            best = (policy, t)
    return best


def baseline_jointdnn(profile: CostProfile, net: NetworkSpec,
                      batch: int) -> tuple[Policy, float]:
    """Device-front / cloud-back split schedule."""
    return baseline_two_tier(profile, net, "device", "cloud", batch)


def baseline_compressed_split(profile: CostProfile, net: NetworkSpec,
                              batch: int, c_bits: int) -> tuple[Policy, float]:
    """Edge/cloud split with activations quantized to `c_bits` on the wire."""
    if not isinstance(c_bits, int) or not (1 <= c_bits <= 32):
        raise ValidationError(f"c_bits must be in 1..32, got {c_bits!r}")
    return baseline_two_tier(profile, net, "edge", "cloud", batch,
                             activation_scale=c_bits / 32.0)


def chain_cost(profile: CostProfile, net: NetworkSpec, batch: int,
               k_device: int, k_edge: int) -> float:
    """Barrier-sequential three-stage chain: device 1..k1, edge k1+1..k2,
    cloud k2+1..N, each stage owning its layers exclusively (no weight
    exchange); activations/gradients cross stage boundaries for the whole
    batch."""
    n = profile.num_layers
    if not (0 <= k_device <= k_edge <= n):
        raise ValidationError("chain splits must satisfy 0 <= k1 <= k2 <= N")
    stages = [(w, lo, hi) for (w, lo, hi) in
              (("device", 1, k_device), ("edge", k_device + 1, k_edge),
               ("cloud", k_edge + 1, n)) if lo <= hi]
    q = profile.model.sample_bytes
    t = comm_time(batch * q, path_bandwidth("device", stages[0][0], net))
    for i, (w, lo, hi) in enumerate(stages):
        t += compute_time(profile, w, lo, hi, batch, "forward")
        if i + 1 < len(stages):
            t += comm_time(batch * profile.output_bytes[hi - 1],
                           path_bandwidth(w, stages[i + 1][0], net))
    for i in range(len(stages) - 1, -1, -1):
        w, lo, hi = stages[i]
        t += compute_time(profile, w, lo, hi, batch, "backward")
        if i > 0:
            boundary = stages[i - 1][2]
            t += comm_time(batch * profile.output_bytes[boundary - 1],
                           path_bandwidth(w, stages[i - 1][0], net))
    t += max(_segment_sum(profile.update_time[w], lo, hi)
             for (w, lo, hi) in stages)
    return t


def baseline_jointdnn_plus(profile: CostProfile, net: NetworkSpec,
                           batch: int) -> tuple[Policy | ChainSchedule, float]:
    """Best of the pairwise splits and the three-tier chain."""
    candidates: list[tuple[Policy | ChainSchedule, float]] = [
        baseline_two_tier(profile, net, "device", "edge", batch),
        baseline_two_tier(profile, net, "device", "cloud", batch),
        baseline_two_tier(profile, net, "edge", "cloud", batch),
    ]
    chain_best = None
    n = profile.num_layers
    for k1 in range(0, n + 1):
        for k2 in range(k1, n + 1):
            t = chain_cost(profile, net, batch, k1, k2)
            if chain_best is None or t < chain_best[1]:
                chain_best = (ChainSchedule(k1, k2), t)
    candidates.append(chain_best)
    best = candidates[0]
    for cand in candidates[1:]:
        if cand[1] < best[1]:
            best = cand
    return best
