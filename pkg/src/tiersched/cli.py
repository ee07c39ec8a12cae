"""Command-line front end.

Every command is a thin client of the HTTP service: by default an in-process
instance is used, or point --server at a running `tiersched serve`.
Exit codes: 0 success, 2 configuration error, 3 validation/infeasible input.
"""
from __future__ import annotations

import json
import sys

import click
import httpx

from .simulator import TRACE_COLUMNS

EXIT_CONFIG = 2
EXIT_VALIDATION = 3


class _InProcessClient:
    """Drives the ASGI app directly; the transport is async-only, so each
    request runs on a private event loop."""

    def __init__(self):
        from .service.app import create_app
        self._transport = httpx.ASGITransport(app=create_app())

    def request(self, method: str, path: str, json=None) -> httpx.Response:
        import asyncio

        async def go():
            async with httpx.AsyncClient(
                    transport=self._transport,
                    base_url="http://tiersched.local",
                    timeout=600.0) as client:
                return await client.request(method, path, json=json)

        return asyncio.run(go())

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    return _InProcessClient()


def _call(client, method: str, path: str, payload=None) -> dict:
    resp = client.request(method, path, json=payload)
    if resp.status_code >= 400:
        try:
            body = resp.json()
            detail = body.get("detail", resp.text)
            kind = body.get("kind", "validation")
        except Exception:
            detail, kind = resp.text, "validation"
        click.echo(f"error: {detail}", err=True)
        sys.exit(EXIT_CONFIG if kind == "config" else EXIT_VALIDATION)
    return resp.json()


def _load_json(path: str, what: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        click.echo(f"error: {what} file not found: {path}", err=True)
        sys.exit(EXIT_CONFIG)
    except json.JSONDecodeError as exc:
        click.echo(f"error: {what} file is not valid JSON: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Base URL of a running service; default runs in-process.")
@click.pass_context
def main(ctx, server):
    """Scheduling optimizer and simulator for device/edge/cloud training."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


def _resolve_profile(client, profile_conf) -> dict:
    """A profile is a path to a document or an inline synthesis spec."""
    if isinstance(profile_conf, str):
        return _load_json(profile_conf, "profile")
    if isinstance(profile_conf, dict):
        req = {}
        if "arch" in profile_conf:
            req["arch"] = profile_conf["arch"]
        if "model" in profile_conf:
            req["model_spec"] = profile_conf["model"]
        if "rates" in profile_conf:
            req["rates"] = profile_conf["rates"]
        return _call(client, "POST", "/profiles/synthesize", req)
    click.echo("error: config 'profile' must be a path or a synthesis spec",
               err=True)
    sys.exit(EXIT_CONFIG)


@main.command("gen-profile")
@click.option("--arch", default=None,
              help="Built-in architecture (t3, lenet5, alexnet).")
@click.option("--model-json", default=None, type=click.Path(),
              help="Inline model description file instead of --arch.")
@click.option("--device-rate", type=float, default=None, help="flops/s")
@click.option("--edge-rate", type=float, default=None, help="flops/s")
@click.option("--cloud-rate", type=float, default=None, help="flops/s")
@click.option("--device-update-rate", type=float, default=None, help="params/s")
@click.option("--edge-update-rate", type=float, default=None, help="params/s")
@click.option("--cloud-update-rate", type=float, default=None, help="params/s")
@click.option("-o", "--output", required=True, type=click.Path())
@click.pass_context
def gen_profile(ctx, arch, model_json, device_rate, edge_rate, cloud_rate,
                device_update_rate, edge_update_rate, cloud_update_rate,
                output):
    """Synthesize a cost profile and write it as JSON."""
    if (arch is None) == (model_json is None):
        click.echo("error: provide exactly one of --arch or --model-json",
                   err=True)
        sys.exit(EXIT_CONFIG)
    req: dict = {}
    if arch:
        req["arch"] = arch
    else:
        req["model_spec"] = _load_json(model_json, "model")
    rates = {}
    defaults = {"device": 1e9, "edge": 2e9, "cloud": 2e10}
    for wid, rate, urate in (("device", device_rate, device_update_rate),
                             ("edge", edge_rate, edge_update_rate),
                             ("cloud", cloud_rate, cloud_update_rate)):
        if rate is not None or urate is not None:
            compute = rate if rate is not None else defaults[wid]
            rates[wid] = {"compute_rate": compute,
                          "update_rate": urate if urate is not None else compute}
    if rates:
        req["rates"] = rates
    with _client(ctx.obj["server"]) as client:
        doc = _call(client, "POST", "/profiles/synthesize", req)
    with open(output, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    click.echo(f"wrote profile {doc['model']['name']!r} "
               f"({len(doc['model']['layers'])} layers) to {output}")


def _scenario_from_options(config, profile, bw_de, bw_ec, batch, methods,
                           inner, jalad_c_bits, edge_scale, simulate):
    conf = dict(_load_json(config, "config")) if config else {}
    if profile:
        conf["profile"] = profile
    if "profile" not in conf:
        click.echo("error: no profile given (config 'profile' or --profile)",
                   err=True)
        sys.exit(EXIT_CONFIG)
    scenario = {k: v for k, v in conf.items() if k != "profile"}
    if bw_de:
        scenario["bw_device_edge"] = list(bw_de)
    if bw_ec:
        scenario["bw_edge_cloud"] = list(bw_ec)
    if batch is not None:
        scenario["batch"] = batch
    if methods:
        scenario["methods"] = [m.strip() for m in methods.split(",") if m.strip()]
    if inner:
        scenario["inner_solver"] = inner
    if jalad_c_bits is not None:
        scenario["jalad_c_bits"] = jalad_c_bits
    if edge_scale:
        scenario["edge_core_scale"] = list(edge_scale)
    if simulate is not None:
        scenario["simulate"] = simulate
    return conf["profile"], scenario


def _run_sweep(ctx, profile_conf, scenario, output, policy_out):
    with _client(ctx.obj["server"]) as client:
        profile_doc = _resolve_profile(client, profile_conf)
        resp = _call(client, "POST", "/sweep",
                     {"profile": profile_doc, "scenario": scenario})
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(resp["csv"])
        click.echo(f"wrote {len(resp['rows'])} result rows to {output}")
    else:
        click.echo(resp["csv"], nl=False)
    chosen = [r for r in resp["rows"] if r["method"] == "hiertrain"]
    for r in chosen:
        click.echo(
            f"hiertrain @ bw_de={_fmt(r['bw_de'])} bw_ec={_fmt(r['bw_ec'])} "
            f"edge_scale={_fmt(r['edge_scale'])}: t={_fmt(r['t_total_model'])}s "
            f"mapping={r['mapping']} m_s={r['m_s']} m_l={r['m_l']} "
            f"b=({r['b_o']},{r['b_s']},{r['b_l']})")
    if policy_out and chosen:
        r = chosen[0]
        o, s, l = r["mapping"].split("/")
        policy = {"mapping": {"worker_o": o, "worker_s": s, "worker_l": l},
                  "m_s": r["m_s"], "m_l": r["m_l"],
                  "b_o": r["b_o"], "b_s": r["b_s"], "b_l": r["b_l"]}
        with open(policy_out, "w", encoding="utf-8") as fh:
            json.dump(policy, fh, indent=2)
            fh.write("\n")
        click.echo(f"wrote best policy to {policy_out}")


@main.command("optimize")
@click.option("--config", default=None, type=click.Path(),
              help="Scenario config JSON.")
@click.option("--profile", default=None, type=click.Path(),
              help="Profile document path (overrides config).")
@click.option("--bw-de", multiple=True, type=float,
              help="Device-edge bandwidth bits/s (repeatable).")
@click.option("--bw-ec", multiple=True, type=float,
              help="Edge-cloud bandwidth bits/s (repeatable).")
@click.option("--batch", type=int, default=None)
@click.option("--methods", default=None,
              help="Comma-separated subset of methods.")
@click.option("--inner", type=click.Choice(["exact", "relax_round"]),
              default=None)
@click.option("--jalad-c-bits", type=int, default=None)
@click.option("--simulate/--no-simulate", default=None)
@click.option("--best-policy-out", default=None, type=click.Path(),
              help="Write the first hiertrain policy as JSON.")
@click.option("-o", "--output", default=None, type=click.Path(),
              help="Results CSV path (default: stdout).")
@click.pass_context
def cmd_optimize(ctx, config, profile, bw_de, bw_ec, batch, methods, inner,
                 jalad_c_bits, simulate, best_policy_out, output):
    """Optimize policies over a bandwidth grid and emit result rows."""
    profile_conf, scenario = _scenario_from_options(
        config, profile, bw_de, bw_ec, batch, methods, inner, jalad_c_bits,
        None, simulate)
    _run_sweep(ctx, profile_conf, scenario, output, best_policy_out)


@main.command("sweep-edge-scale")
@click.option("--config", default=None, type=click.Path())
@click.option("--profile", default=None, type=click.Path())
@click.option("--bw-de", multiple=True, type=float)
@click.option("--bw-ec", multiple=True, type=float)
@click.option("--batch", type=int, default=None)
@click.option("--methods", default=None)
@click.option("--inner", type=click.Choice(["exact", "relax_round"]),
              default=None)
@click.option("--jalad-c-bits", type=int, default=None)
@click.option("--edge-scale", multiple=True, type=float,
              help="Edge compute multiplier (repeatable).")
@click.option("--simulate/--no-simulate", default=None)
@click.option("-o", "--output", default=None, type=click.Path())
@click.pass_context
def cmd_sweep_edge_scale(ctx, config, profile, bw_de, bw_ec, batch, methods,
                         inner, jalad_c_bits, edge_scale, simulate, output):
    """Re-optimize while scaling the edge worker's compute capability."""
    profile_conf, scenario = _scenario_from_options(
        config, profile, bw_de, bw_ec, batch, methods, inner, jalad_c_bits,
        edge_scale, simulate)
    if "edge_core_scale" not in scenario:
        click.echo("error: sweep-edge-scale needs --edge-scale or "
                   "'edge_core_scale' in the config", err=True)
        sys.exit(EXIT_CONFIG)
    _run_sweep(ctx, profile_conf, scenario, output, None)


@main.command("simulate")
@click.option("--profile", required=True, type=click.Path())
@click.option("--policy", "policy_path", required=True, type=click.Path())
@click.option("--bw-de", type=float, required=True)
@click.option("--bw-ec", type=float, required=True)
@click.option("--batch", type=int, required=True)
@click.option("-o", "--output", default=None, type=click.Path(),
              help="Trace CSV path (default: stdout).")
@click.pass_context
def cmd_simulate(ctx, profile, policy_path, bw_de, bw_ec, batch, output):
    """Replay one iteration under a policy and report model agreement."""
    req = {
        "profile": _load_json(profile, "profile"),
        "policy": _load_json(policy_path, "policy"),
        "bw_device_edge": bw_de,
        "bw_edge_cloud": bw_ec,
        "batch": batch,
    }
    with _client(ctx.obj["server"]) as client:
        resp = _call(client, "POST", "/simulate", req)
    lines = [",".join(TRACE_COLUMNS)]
    for e in resp["events"]:
        lines.append(",".join(_fmt(e[k]) for k in
                              ("phase", "kind", "src", "dst", "start_s",
                               "duration_s", "payload_bytes", "layers",
                               "samples")))
    text = "\n".join(lines) + "\n"
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)
    click.echo(f"makespan={_fmt(resp['makespan'])}s "
               f"model={_fmt(resp['model_total'])}s "
               f"relative_gap={_fmt(resp['relative_gap'])}")


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def cmd_serve(host, port):
    """Run the HTTP service."""
    import uvicorn
    uvicorn.run("tiersched.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
