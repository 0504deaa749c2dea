"""Evaluation measurements over experiment logs.

Top10HR pools two runs and reports the share of the pooled top-k held by one
run; TSBA is the relative wall-clock saving to reach a baseline's best
metric. Both are rank or time based, so they stay meaningful across metric
rescalings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidInput
from .indicators import INDICATORS
from .scheduler import ExperimentLog
from .trace import read_trace_file


@dataclass(frozen=True)
class RankedTrial:
    trial_id: str
    source_run: str
    final_metric: float
    metric_mode: str
    finished_at_ms: int


def ranked_trials(log: ExperimentLog, source_run: str | None = None) -> list[RankedTrial]:
    """Trials of a log as ranking candidates; non-finite metrics are excluded.

    Benign-terminated trials rank by their best metric (terminated but still
    candidates); malign-terminated ones already carry their last metric in
    final_metric_for_sampler.
    """
    run = source_run or log.experiment_id
    out = []
    for t in log.trials:
        if not math.isfinite(t.final_metric_for_sampler):
            continue
        out.append(
            RankedTrial(
                trial_id=t.trial_id,
                source_run=run,
                final_metric=t.final_metric_for_sampler,
                metric_mode=log.metric_mode,
                finished_at_ms=t.finished_at_ms,
            )
        )
    return out


def _sort_key(mode: str):
    sign = -1.0 if mode == "maximize" else 1.0

    def key(t: RankedTrial):
        return (sign * t.final_metric, t.finished_at_ms, t.trial_id)

    return key


def top10hr(
    run_i: list[RankedTrial], run_j: list[RankedTrial], k: int = 10
) -> float:
    """Share (percent) of the pooled top-k contributed by run_i."""
    if not run_i or not run_j:
        raise InvalidInput("both runs must be nonempty")
    modes = {t.metric_mode for t in run_i} | {t.metric_mode for t in run_j}
    if len(modes) != 1:
        raise InvalidInput(f"mixed metric modes {sorted(modes)}")
    pool = list(run_i) + list(run_j)
    if len(pool) < k:
        raise InvalidInput(f"pool of {len(pool)} trials cannot fill top-{k}")
    mode = modes.pop()
    pool.sort(key=_sort_key(mode))
    top = pool[:k]
    runs_i = {(t.source_run, t.trial_id) for t in run_i}
    k_i = sum(1 for t in top if (t.source_run, t.trial_id) in runs_i)
    return 100.0 * k_i / k


def best_so_far_reach_ms(
    log: ExperimentLog, target: float, metric_mode: str
) -> int | None:
    """Earliest event timestamp at which the run's best metric reaches target."""
    for ev in log.events:
        if ev.kind != "epoch_reported":
            continue
        v = ev.payload["val_metric"]
        if isinstance(v, str):
            continue  # non-finite metric cannot reach a finite target
        if metric_mode == "maximize" and v >= target:
            return ev.ts
        if metric_mode == "minimize" and v <= target:
            return ev.ts
    return None


def tsba(
    baseline_best: float,
    baseline_budget_ms: int,
    enhanced_log: ExperimentLog,
    metric_mode: str,
) -> float | None:
    """Relative time saving (percent) to reach the baseline's best metric.

    ``baseline_budget_ms`` is the baseline's reference time T_j (the time at
    which it reached its best). Returns None when the enhanced run never
    reaches the baseline metric within its log.
    """
    if baseline_budget_ms <= 0:
        raise InvalidInput("baseline_budget_ms must be positive")
    t_i = best_so_far_reach_ms(enhanced_log, baseline_best, metric_mode)
    if t_i is None:
        return None
    return 100.0 * (baseline_budget_ms - t_i) / baseline_budget_ms


def achieve_time_ms(log: ExperimentLog) -> tuple[float, int] | None:
    """(best metric, earliest ts achieving it) over a run's epoch stream."""
    best = None
    best_ts = None
    for ev in log.events:
        if ev.kind != "epoch_reported":
            continue
        v = ev.payload["val_metric"]
        if isinstance(v, str):
            continue
        better = (
            best is None
            or (log.metric_mode == "maximize" and v > best)
            or (log.metric_mode == "minimize" and v < best)
        )
        if better:
            best, best_ts = v, ev.ts
    if best is None:
        return None
    return best, best_ts


@dataclass
class RunSummary:
    experiment_id: str
    trials_run: int
    completed: int
    terminated: int
    failed: int
    benign_terminated: int
    top1: float
    mean_top10: float
    top10_count: int
    indicator_terminations: dict[str, int]
    total_wall_ms: int

    def table(self) -> str:
        lines = [
            f"experiment     {self.experiment_id}",
            f"trials         {self.trials_run} "
            f"(completed {self.completed}, terminated {self.terminated}, failed {self.failed})",
            f"benign stops   {self.benign_terminated}",
            f"top1           {self.top1:.6g}",
            f"top10 mean     {self.mean_top10:.6g} (over {self.top10_count})",
            "terminations   "
            + " ".join(f"{k}:{v}" for k, v in self.indicator_terminations.items() if v),
        ]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "trials_run": self.trials_run,
            "completed": self.completed,
            "terminated": self.terminated,
            "failed": self.failed,
            "benign_terminated": self.benign_terminated,
            "top1": self.top1 if math.isfinite(self.top1) else None,
            "mean_top10": self.mean_top10 if math.isfinite(self.mean_top10) else None,
            "top10_count": self.top10_count,
            "indicator_terminations": self.indicator_terminations,
            "total_wall_ms": self.total_wall_ms,
        }


def _summary_from_states(
    experiment_id: str,
    metric_mode: str,
    rows: list[tuple[str, str | None, float, int]],
) -> RunSummary:
    """rows: (status, reason, final_metric, wall_ms)."""
    completed = sum(1 for s, *_ in rows if s == "completed")
    terminated = sum(1 for s, *_ in rows if s == "terminated")
    failed = sum(1 for s, *_ in rows if s == "failed")
    indicator_counts = {name: 0 for name in INDICATORS}
    benign = 0
    for status, reason, _, _ in rows:
        if status != "terminated" or not reason:
            continue
        names = [r for r in reason.split(",") if r in indicator_counts]
        for name in names:
            indicator_counts[name] += 1
        if names and all(n == "NMG" for n in names):
            benign += 1
    finite = sorted(
        (m for _, _, m, _ in rows if math.isfinite(m)),
        reverse=metric_mode == "maximize",
    )
    top1 = finite[0] if finite else math.nan
    top10 = finite[:10]
    mean_top10 = sum(top10) / len(top10) if top10 else math.nan
    return RunSummary(
        experiment_id=experiment_id,
        trials_run=len(rows),
        completed=completed,
        terminated=terminated,
        failed=failed,
        benign_terminated=benign,
        top1=top1,
        mean_top10=mean_top10,
        top10_count=len(top10),
        indicator_terminations=indicator_counts,
        total_wall_ms=sum(w for *_, w in rows),
    )


def summarize(log: ExperimentLog) -> RunSummary:
    rows = [
        (t.status, t.termination_reason, t.final_metric_for_sampler, t.wall_ms)
        for t in log.trials
    ]
    return _summary_from_states(log.experiment_id, log.metric_mode, rows)


def summarize_traces(trace_dir, experiment_id: str = "traces") -> RunSummary:
    """Summary recomputed from raw trace files alone (cross-source check).

    The sampler-feedback metric is derived from each trace's final record:
    best metric for completed or benign stops, last metric for malign stops,
    none for failures.
    """
    rows = []
    metric_mode = "maximize"
    for path in sorted(Path(trace_dir).glob("*.trace.jsonl")):
        trace = read_trace_file(path)
        if trace.final is None:
            continue
        if trace.epochs:
            metric_mode = trace.epochs[0].metric_mode
        reason = trace.final.reason
        status = trace.final.status
        names = [r for r in reason.split(",") if r in INDICATORS] if reason else []
        benign_stop = bool(names) and all(n == "NMG" for n in names)
        if status == "failed":
            metric = math.nan
        elif status == "terminated" and reason not in ("budget",) and not benign_stop and reason:
            metric = trace.epochs[-1].val_metric if trace.epochs else math.nan
        else:
            metric = trace.final.best_val_metric
        wall = trace.epochs[-1].wall_ms if trace.epochs else 0
        rows.append((status, reason or None, metric, wall))
    return _summary_from_states(experiment_id, metric_mode, rows)


def compare_runs(
    log_a: ExperimentLog,
    log_b: ExperimentLog,
    k: int = 10,
    baseline_best: float | None = None,
    baseline_budget_ms: int | None = None,
) -> dict:
    """Side-by-side comparison document: summaries, Top10HR both ways, TSBA.

    By default the baseline reference (A_j, T_j) is run A's best metric and
    the time it was achieved, mirroring a baseline-vs-enhanced comparison.
    """
    ranked_a = ranked_trials(log_a)
    ranked_b = ranked_trials(log_b)
    hr_b = top10hr(ranked_b, ranked_a, k=k)
    hr_a = top10hr(ranked_a, ranked_b, k=k)
    ach = achieve_time_ms(log_a)
    if baseline_best is None and ach is not None:
        baseline_best = ach[0]
    if baseline_budget_ms is None and ach is not None:
        baseline_budget_ms = ach[1]
    ts = None
    if baseline_best is not None and baseline_budget_ms:
        ts = tsba(baseline_best, baseline_budget_ms, log_b, log_b.metric_mode)
    return {
        "baseline": summarize(log_a).to_dict(),
        "enhanced": summarize(log_b).to_dict(),
        "top10hr_baseline": hr_a,
        "top10hr_enhanced": hr_b,
        "baseline_best": baseline_best,
        "baseline_time_ms": baseline_budget_ms,
        "tsba_enhanced": ts,
    }


def compare_table(doc: dict) -> str:
    rows = [
        ("run", "trials", "top1", "top10_mean", "Top10HR", "TSBA"),
        (
            doc["baseline"]["experiment_id"],
            str(doc["baseline"]["trials_run"]),
            _fmt(doc["baseline"]["top1"]),
            _fmt(doc["baseline"]["mean_top10"]),
            f"{doc['top10hr_baseline']:.0f}%",
            "-",
        ),
        (
            doc["enhanced"]["experiment_id"],
            str(doc["enhanced"]["trials_run"]),
            _fmt(doc["enhanced"]["top1"]),
            _fmt(doc["enhanced"]["mean_top10"]),
            f"{doc['top10hr_enhanced']:.0f}%",
            "-" if doc["tsba_enhanced"] is None else f"{doc['tsba_enhanced']:.0f}%",
        ),
    ]
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(r, widths)) for r in rows)


def _fmt(v) -> str:
    if v is None:
        return "-"
    return f"{v:.4g}"


def timeline_csv(logs: list[ExperimentLog]) -> str:
    """Best-so-far trajectories as CSV for external plotting."""
    lines = ["run,ts_ms,best_metric"]
    for log in logs:
        best = None
        for ev in log.events:
            if ev.kind != "epoch_reported":
                continue
            v = ev.payload["val_metric"]
            if isinstance(v, str):
                continue
            better = (
                best is None
                or (log.metric_mode == "maximize" and v > best)
                or (log.metric_mode == "minimize" and v < best)
            )
            if better:
                best = v
                lines.append(f"{log.experiment_id},{ev.ts},{v!r}")
    return "\n".join(lines) + "\n"


def save_compare(doc: dict, logs: list[ExperimentLog], out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    (out / "compare_timeline.csv").write_text(timeline_csv(logs), encoding="utf-8")
