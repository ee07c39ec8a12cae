"""HTTP service wrapping the core package.

Endpoints cover profile synthesis, policy optimization, iteration simulation
and experiment sweeps; the CLI is a thin client of this API.
"""
from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..architectures import DEFAULT_RATES, build_model
from ..errors import ConfigError, TierschedError, ValidationError
from ..latency import Policy, RoleMapping, total_time
from ..profiles import (NetworkSpec, WorkerSpec, profile_from_dict,
                        profile_to_dict, synthesize_profile)
from ..scheduler import optimize
from ..simulator import simulate_iteration, trace_to_rows
from ..sweeps import rows_to_csv, run_grid, scenario_from_dict
from . import models as m


def _policy_doc(policy: Policy) -> m.PolicyDoc:
    return m.PolicyDoc(
        mapping=m.MappingDoc(worker_o=policy.mapping.worker_o,
                             worker_s=policy.mapping.worker_s,
                             worker_l=policy.mapping.worker_l),
        m_s=policy.m_s, m_l=policy.m_l,
        b_o=policy.b_o, b_s=policy.b_s, b_l=policy.b_l,
    )


def _policy_from_doc(doc: m.PolicyDoc) -> Policy:
    return Policy(
        mapping=RoleMapping(doc.mapping.worker_o, doc.mapping.worker_s,
                            doc.mapping.worker_l),
        m_s=doc.m_s, m_l=doc.m_l, b_o=doc.b_o, b_s=doc.b_s, b_l=doc.b_l,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="tiersched", version=__version__)

    @app.exception_handler(ConfigError)
    async def config_error(request: Request, exc: ConfigError):
        return JSONResponse(status_code=400,
                            content={"detail": str(exc), "kind": "config"})

    @app.exception_handler(TierschedError)
    async def domain_error(request: Request, exc: TierschedError):
        return JSONResponse(status_code=422,
                            content={"detail": str(exc), "kind": "validation"})

    @app.get("/health", response_model=m.HealthResponse)
    def health():
        return m.HealthResponse(status="ok", version=__version__)

    @app.post("/profiles/synthesize", response_model=m.ProfileDoc)
    def synthesize(req: m.SynthesizeRequest):
        if (req.arch is None) == (req.model_spec is None):
            raise ConfigError("provide exactly one of 'arch' or 'model_spec'")
        if req.arch is not None:
            model = build_model(req.arch)
        else:
            model = _model_from_doc(req.model_spec)
        workers = dict(DEFAULT_RATES)
        for wid, rates in (req.rates or {}).items():
            workers[wid] = WorkerSpec(wid, rates.compute_rate,
                                      rates.update_rate)
        profile = synthesize_profile(model, workers.values())
        return profile_to_dict(profile)

    @app.post("/optimize", response_model=m.OptimizeResponse)
    def run_optimize(req: m.OptimizeRequest):
        profile = profile_from_dict(req.profile.model_dump())
        net = NetworkSpec(req.bw_device_edge, req.bw_edge_cloud)
        result = optimize(profile, net, req.batch, inner=req.inner_solver)
        return m.OptimizeResponse(
            best=_policy_doc(result.best),
            best_time=result.best_time,
            per_mapping_best=[
                m.MappingBestDoc(
                    mapping=m.MappingDoc(worker_o=mp.worker_o,
                                         worker_s=mp.worker_s,
                                         worker_l=mp.worker_l),
                    policy=_policy_doc(pol), seconds=sec)
                for mp, pol, sec in result.per_mapping_best
            ],
            search_stats=m.SearchStatsDoc(
                triples=result.search_stats.triples,
                evaluations=result.search_stats.evaluations),
        )

    @app.post("/simulate", response_model=m.SimulateResponse)
    def run_simulate(req: m.SimulateRequest):
        profile = profile_from_dict(req.profile.model_dump())
        net = NetworkSpec(req.bw_device_edge, req.bw_edge_cloud)
        policy = _policy_from_doc(req.policy)
        trace = simulate_iteration(policy, profile, net, req.batch)
        model_total = total_time(policy, profile, net, req.batch).t_total
        gap = (abs(trace.makespan - model_total) / model_total
               if model_total else 0.0)
        events = [m.EventDoc(phase=r[0], kind=r[1], src=r[2], dst=r[3],
                             start_s=r[4], duration_s=r[5], payload_bytes=r[6],
                             layers=r[7], samples=r[8])
                  for r in trace_to_rows(trace)]
        return m.SimulateResponse(makespan=trace.makespan,
                                  model_total=model_total,
                                  relative_gap=gap, events=events)

    @app.post("/sweep", response_model=m.SweepResponse)
    def run_sweep(req: m.SweepRequest):
        profile = profile_from_dict(req.profile.model_dump())
        scenario_fields = {k: v for k, v in req.scenario.model_dump().items()
                           if v is not None}
        config = scenario_from_dict(scenario_fields)
        rows = run_grid(profile, config)
        return m.SweepResponse(
            rows=[m.ResultRowDoc(
                method=r.method, bw_de=r.bw_de, bw_ec=r.bw_ec,
                edge_scale=r.edge_scale, B=r.batch, mapping=r.mapping,
                m_s=r.m_s, m_l=r.m_l, b_o=r.b_o, b_s=r.b_s, b_l=r.b_l,
                t_total_model=r.t_total_model, t_total_sim=r.t_total_sim,
                speedup_vs_all_cloud=r.speedup_vs_all_cloud,
                speedup_vs_all_edge=r.speedup_vs_all_edge)
                for r in rows],
            csv=rows_to_csv(rows),
        )

    return app


def _model_from_doc(doc: "m.ModelDoc"):
    from ..profiles import LayerSpec, ModelSpec
    layers = tuple(LayerSpec(index=l.index, kind=l.kind,
                             input_elems=l.input_elems,
                             output_elems=l.output_elems,
                             flops_forward=l.flops_forward,
                             param_count=l.param_count)
                   for l in doc.layers)
    return ModelSpec(doc.name, layers, doc.sample_bytes)


app = create_app()
