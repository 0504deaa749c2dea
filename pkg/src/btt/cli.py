"""Command-line client for the diagnosis-driven HPO service.

Every command talks to the HTTP API. By default an in-process service
instance handles the request (no daemon needed); point --server or BTT_SERVER
at a running `btt serve` to share one service across clients. Path arguments
to `run`, `replay`, `calibrate` and `compare` refer to the service's
filesystem, which is the local one for the in-process default.

BTT_LOG=debug|info|warning|error controls verbosity.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click
import httpx

from .errors import BttError
from .indicators import IndicatorConfig

log = logging.getLogger("btt")


class ServiceClient:
    def __init__(self, server: str | None):
        self._server = server.rstrip("/") if server else None
        self._app = None
        if self._server is None:
            from .service.app import create_app

            self._app = create_app()

    def call(self, method: str, path: str, payload: dict | None = None) -> dict:
        if self._server is not None:
            with httpx.Client(base_url=self._server, timeout=None) as client:
                resp = client.request(method, path, json=payload)
        else:
            import asyncio

            async def _dispatch():
                transport = httpx.ASGITransport(app=self._app)
                async with httpx.AsyncClient(
                    transport=transport, base_url="http://btt.internal", timeout=None
                ) as client:
                    return await client.request(method, path, json=payload)

            resp = asyncio.run(_dispatch())
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            raise click.ClickException(str(detail))
        return resp.json()


def _load_indicator_config(path: str | None) -> dict | None:
    if path is None:
        return None
    try:
        return IndicatorConfig.from_file(path).to_dict()
    except (OSError, BttError, ValueError) as exc:
        raise click.ClickException(f"{path}: {exc}") from None


@click.group()
@click.option(
    "--server",
    envvar="BTT_SERVER",
    default=None,
    help="URL of a running service; default is an in-process instance.",
)
@click.pass_context
def main(ctx, server):
    """Trace, diagnose, and early-terminate hyperparameter-search trials."""
    level = os.environ.get("BTT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    ctx.obj = ServiceClient(server)


@main.command()
@click.option("--runner", default="toy_mlp", show_default=True)
@click.option("--policy", type=click.Choice(["none", "bttackler", "msr"]), default="bttackler", show_default=True)
@click.option("--budget", default="trials:8", show_default=True, help="trials:N | wall:Nms | sim:Nms")
@click.option("--concurrency", type=int, default=8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--space", "space_file", type=click.Path(exists=True, dir_okay=False), default=None, help="Search-space JSON; defaults to the runner's built-in space.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Indicator config (TOML or JSON).")
@click.option("--out", default="./btt-out", show_default=True, help="Output root directory.")
@click.option("--time-mode", type=click.Choice(["sim", "real"]), default=None, help="Clock mode; inferred from the budget kind when omitted.")
@click.option("--experiment-id", default=None)
@click.option("--checker-latency-ms", type=int, default=0, hidden=True)
@click.pass_obj
def run(client, runner, policy, budget, concurrency, seed, space_file, config_path, out, time_mode, experiment_id, checker_latency_ms):
    """Run one HPO experiment; writes traces, the event log, and a summary."""
    exp_id = experiment_id or f"{runner}-{policy}-s{seed}"
    out_dir = Path(out) / exp_id
    manifest = {
        "runner": runner,
        "policy": policy,
        "budget": budget,
        "concurrency": concurrency,
        "seed": seed,
        "out_dir": str(out_dir),
        "experiment_id": exp_id,
        "space_file": str(Path(space_file).resolve()) if space_file else None,
        "indicator_config": _load_indicator_config(config_path),
        "time_mode": time_mode,
        "checker_latency_ms": checker_latency_ms,
    }
    resp = client.call("POST", "/experiments/run", manifest)
    click.echo(resp["summary_table"])
    click.echo(f"outputs        {resp['experiment_dir']}")


@main.command()
@click.argument("trace_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--epoch", type=int, default=None, help="Diagnose one epoch instead of all.")
@click.pass_obj
def diagnose(client, trace_file, config_path, epoch):
    """Diagnose a recorded trace; prints verdicts (informational, exit 0)."""
    payload = {
        "trace_jsonl": Path(trace_file).read_text(encoding="utf-8"),
        "indicator_config": _load_indicator_config(config_path),
        "epoch": epoch,
    }
    resp = client.call("POST", "/diagnose", payload)
    for rep in resp["reports"]:
        positives = [v for v in rep["verdicts"] if v["positive"]]
        if positives:
            detail = "; ".join(f"{v['indicator']}[{v['evidence']}]" for v in positives)
            click.echo(f"epoch {rep['epoch']:>3}  {rep['decision']:<17} {detail}")
        else:
            click.echo(f"epoch {rep['epoch']:>3}  continue")
    if resp["first_positive_epoch"] is None:
        click.echo(f"{resp['trial_id']}: no indicator fired")
    else:
        click.echo(f"{resp['trial_id']}: first positive at epoch {resp['first_positive_epoch']}")


@main.command()
@click.argument("trace_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--mode", type=click.Choice(["combined", "per_indicator"]), default="combined", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", default="./btt-out", show_default=True)
@click.pass_obj
def replay(client, trace_dir, mode, config_path, out):
    """Re-run the checker over recorded traces (no training)."""
    payload = {
        "trace_dir": str(Path(trace_dir).resolve()),
        "mode": mode,
        "indicator_config": _load_indicator_config(config_path),
    }
    resp = client.call("POST", "/replay", payload)
    click.echo(resp["table"])
    for w in resp["warnings"]:
        click.echo(f"warning: {w}", err=True)
    out_path = Path(out)
    out_path.mkdir(parents=True, exist_ok=True)
    report_file = out_path / "replay_report.jsonl"
    report_file.write_text(resp["report_jsonl"], encoding="utf-8")
    click.echo(f"report         {report_file}")


@main.command()
@click.argument("trace_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--labels", "labels_file", type=click.Path(exists=True, dir_okay=False), required=True, help="JSON map of trial_id to good/bad.")
@click.option("--grid", "grid_file", type=click.Path(exists=True, dir_okay=False), required=True, help="JSON list of indicator-config objects.")
@click.option("--out", default="./btt-out", show_default=True)
@click.pass_obj
def calibrate(client, trace_dir, labels_file, grid_file, out):
    """Grade indicator-config candidates against labeled trial outcomes."""
    try:
        labels = json.loads(Path(labels_file).read_text(encoding="utf-8"))
        grid = json.loads(Path(grid_file).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise click.ClickException(f"invalid JSON: {exc}") from None
    payload = {"trace_dir": str(Path(trace_dir).resolve()), "labels": labels, "grid": grid}
    resp = client.call("POST", "/calibrate", payload)
    click.echo(f"{'rank':<5}{'fpr':>8}{'fnr':>8}{'epochs_saved':>14}")
    for i, row in enumerate(resp["ranked"], start=1):
        click.echo(
            f"{i:<5}{row['false_positive_rate']:>8.3f}{row['false_negative_rate']:>8.3f}"
            f"{row['epochs_saved']:>14}"
        )
    out_path = Path(out)
    out_path.mkdir(parents=True, exist_ok=True)
    result_file = out_path / "calibration.json"
    result_file.write_text(json.dumps(resp["ranked"], indent=2) + "\n", encoding="utf-8")
    click.echo(f"results        {result_file}")


@main.command()
@click.argument("run_a", type=click.Path(exists=True))
@click.argument("run_b", type=click.Path(exists=True))
@click.option("-k", type=int, default=10, show_default=True)
@click.option("--baseline-best", type=float, default=None, help="Override the baseline metric A_j.")
@click.option("--baseline-time-ms", type=int, default=None, help="Override the baseline reference time T_j.")
@click.option("--out", default="./btt-out", show_default=True)
@click.pass_obj
def compare(client, run_a, run_b, k, baseline_best, baseline_time_ms, out):
    """Compare two experiment runs (baseline A vs enhanced B)."""
    payload = {
        "run_a": str(Path(run_a).resolve()),
        "run_b": str(Path(run_b).resolve()),
        "k": k,
        "baseline_best": baseline_best,
        "baseline_time_ms": baseline_time_ms,
    }
    resp = client.call("POST", "/compare", payload)
    click.echo(resp["table"])
    out_path = Path(out)
    out_path.mkdir(parents=True, exist_ok=True)
    (out_path / "compare.json").write_text(
        json.dumps(resp["document"], indent=2) + "\n", encoding="utf-8"
    )
    (out_path / "compare_timeline.csv").write_text(resp["timeline_csv"], encoding="utf-8")
    click.echo(f"results        {out_path / 'compare.json'}")


@main.group()
def spaces():
    """Inspect built-in search spaces."""


@spaces.command("list")
@click.pass_obj
def spaces_list(client):
    resp = client.call("GET", "/spaces")
    for name in resp["runners"]:
        click.echo(name)


@spaces.command("show")
@click.argument("name")
@click.pass_obj
def spaces_show(client, name):
    resp = client.call("GET", f"/spaces/{name}")
    click.echo(json.dumps(resp["space"], indent=2))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8337, show_default=True)
def serve(host, port):
    """Run the HTTP service for remote clients."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
