"""HTTP service exposing the diagnosis engine, runner, replay, and metrics.

The service is the artifact's long-running face: external training loops can
validate emitted traces and request diagnoses, while the CLI drives whole
experiments through the same endpoints (in-process by default, remote with
--server). Paths in requests refer to the server's filesystem.
"""

from __future__ import annotations

import io
import math

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import BttError, InvalidInput, NoSuchTrial
from ..indicators import Decision, IndicatorConfig, diagnose
from ..metrics import compare_runs, compare_table, save_compare, summarize, timeline_csv
from ..runner import get_runner, runner_names
from ..scheduler import Budget, ExperimentLog, run_experiment
from ..simulator import calibrate, replay
from ..space import SearchSpace
from ..stats import STAT_ORDER, compute_stat_vector
from ..trace import dec_num, enc_num, read_trace_stream
from . import models


def _cfg_from(data: dict | None, path: str | None = None) -> IndicatorConfig:
    if data is not None:
        return IndicatorConfig.from_dict(data)
    if path:
        return IndicatorConfig.from_file(path)
    return IndicatorConfig()


def _decode_values(values: list) -> list[float]:
    return [dec_num(v) for v in values]


def create_app() -> FastAPI:
    from .. import toytrainer  # noqa: F401  (registers built-in runners)

    app = FastAPI(title="btt", version=__version__)

    @app.exception_handler(BttError)
    async def _btt_error(request, exc: BttError):
        from fastapi.responses import JSONResponse

        status = 404 if isinstance(exc, NoSuchTrial) else 400
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/health", response_model=models.HealthResponse)
    def health():
        return models.HealthResponse(status="ok", version=__version__)

    @app.get("/spaces", response_model=models.SpaceListResponse)
    def spaces():
        return models.SpaceListResponse(runners=runner_names())

    @app.get("/spaces/{name}", response_model=models.SpaceResponse)
    def space(name: str):
        runner = get_runner(name)
        return models.SpaceResponse(space=runner.space().to_dict())

    @app.post("/stats", response_model=models.StatsResponse)
    def stats(req: models.StatsRequest):
        values = _decode_values(req.values)
        sv = compute_stat_vector(values)
        frozen = [enc_num(v) for v in sv.as_tuple()]
        return models.StatsResponse(
            stats=dict(zip(STAT_ORDER, frozen)), frozen=frozen, n=len(values)
        )

    @app.post("/traces/validate", response_model=models.TraceValidateResponse)
    def validate_trace(req: models.TraceValidateRequest):
        warnings: list[str] = []
        try:
            res = read_trace_stream(io.BytesIO(req.trace_jsonl.encode("utf-8")))
        except BttError as exc:
            return models.TraceValidateResponse(ok=False, error=str(exc))
        if res.truncated_tail:
            warnings.append("trailing line is incomplete")
        return models.TraceValidateResponse(
            ok=True,
            trial_id=res.trace.meta.trial_id,
            epochs_run=len(res.trace.epochs),
            layer_records=len(res.trace.layers),
            truncated_tail=res.truncated_tail,
            warnings=warnings,
        )

    @app.post("/diagnose", response_model=models.DiagnoseResponse)
    def diagnose_trace(req: models.DiagnoseRequest):
        cfg = _cfg_from(req.indicator_config)
        res = read_trace_stream(io.BytesIO(req.trace_jsonl.encode("utf-8")))
        trace = res.trace
        if req.epoch is not None:
            epochs = [req.epoch]
        else:
            epochs = range(cfg.min_epochs_before_diagnosis, len(trace.epochs))
        reports = []
        first_positive = None
        for epoch in epochs:
            rep = diagnose(trace, epoch, cfg)
            reports.append(
                models.DiagnosisModel(
                    trial_id=rep.trial_id,
                    epoch=rep.epoch,
                    decision=rep.decision.value,
                    verdicts=[
                        models.VerdictModel(
                            indicator=v.indicator,
                            positive=v.positive,
                            benign=v.benign,
                            evidence=v.evidence,
                        )
                        for v in rep.verdicts
                    ],
                )
            )
            if first_positive is None and rep.decision is not Decision.CONTINUE:
                first_positive = epoch
        return models.DiagnoseResponse(
            trial_id=trace.meta.trial_id, reports=reports, first_positive_epoch=first_positive
        )

    @app.post("/experiments/run", response_model=models.RunResponse)
    def run(manifest: models.RunManifest):
        runner = get_runner(manifest.runner)
        space = (
            SearchSpace.from_file(manifest.space_file)
            if manifest.space_file
            else runner.space()
        )
        cfg = _cfg_from(manifest.indicator_config, manifest.indicator_config_path)
        log = run_experiment(
            space=space,
            runner=runner,
            policy=manifest.policy,
            budget=Budget.parse(manifest.budget),
            out_dir=manifest.out_dir,
            concurrency=manifest.concurrency,
            seed=manifest.seed,
            indicator_config=cfg,
            time_mode=manifest.time_mode,
            experiment_id=manifest.experiment_id,
            checker_latency_ms=manifest.checker_latency_ms,
            min_peers=manifest.min_peers,
        )
        summary = summarize(log)
        return models.RunResponse(
            experiment_id=log.experiment_id,
            experiment_dir=manifest.out_dir,
            summary=summary.to_dict(),
            summary_table=summary.table(),
        )

    @app.post("/replay", response_model=models.ReplayResponse)
    def replay_dir(req: models.ReplayRequest):
        cfg = _cfg_from(req.indicator_config)
        report = replay(req.trace_dir, cfg, mode=req.mode)
        return models.ReplayResponse(
            mode=report.mode,
            trials=[
                models.ReplayTrialModel(
                    trial_id=t.trial_id,
                    first_positive_epoch=t.first_positive_epoch,
                    triggering_indicators=t.triggering_indicators,
                    decision=t.decision,
                    epochs_run=t.epochs_run,
                    epochs_saved=t.epochs_saved,
                    wall_saved_ms=t.wall_saved_ms,
                )
                for t in report.trials
            ],
            indicator_counts=report.indicator_counts,
            estimated_epochs_saved=report.estimated_epochs_saved,
            estimated_wall_saved_ms=report.estimated_wall_saved_ms,
            warnings=report.warnings,
            table=report.table(),
            report_jsonl=report.to_jsonl(),
        )

    @app.post("/calibrate", response_model=models.CalibrateResponse)
    def calibrate_dir(req: models.CalibrateRequest):
        grid = [IndicatorConfig.from_dict(d) for d in req.grid]
        results = calibrate(req.trace_dir, dict(req.labels), grid)
        return models.CalibrateResponse(
            ranked=[
                models.CalibrationRow(
                    indicator_config=r.cfg.to_dict(),
                    false_positive_rate=r.false_positive_rate,
                    false_negative_rate=r.false_negative_rate,
                    epochs_saved=r.epochs_saved,
                )
                for r in results
            ]
        )

    @app.post("/compare", response_model=models.CompareResponse)
    def compare(req: models.CompareRequest):
        log_a = ExperimentLog.load(req.run_a)
        log_b = ExperimentLog.load(req.run_b)
        doc = compare_runs(
            log_a,
            log_b,
            k=req.k,
            baseline_best=req.baseline_best,
            baseline_budget_ms=req.baseline_time_ms,
        )
        for key in ("baseline_best",):
            if doc[key] is not None and not math.isfinite(doc[key]):
                doc[key] = None
        return models.CompareResponse(
            document=doc, table=compare_table(doc), timeline_csv=timeline_csv([log_a, log_b])
        )

    return app
