"""Replay recorded traces through the checker, without re-training.

Replay answers two questions about a recorded experiment: what would the
diagnosis have terminated (combined mode, first trigger wins), and what can
each indicator claim on its own (per-indicator isolation, the attribution
semantics behind per-indicator bad-trial counts)? Estimated savings come from
the recorded per-epoch wall-clock deltas, so no cost model is needed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BttError, InvalidInput
from .indicators import (
    INDICATORS,
    Decision,
    IndicatorConfig,
    active_indicators,
    diagnose,
)
from .trace import TrialTrace, read_trace_file

MODES = ("combined", "per_indicator")


@dataclass
class TrialReplay:
    trial_id: str
    first_positive_epoch: int | None
    triggering_indicators: list[str]
    decision: str  # continue | terminate_bad | terminate_benign
    epochs_run: int
    epochs_saved: int
    wall_saved_ms: int


@dataclass
class ReplayReport:
    mode: str
    indicator_counts: dict[str, int]
    trials: list[TrialReplay] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def estimated_epochs_saved(self) -> int:
        return sum(t.epochs_saved for t in self.trials)

    @property
    def estimated_wall_saved_ms(self) -> int:
        return sum(t.wall_saved_ms for t in self.trials)

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {
                    "kind": "replay_meta",
                    "mode": self.mode,
                    "trials": len(self.trials),
                    "estimated_epochs_saved": self.estimated_epochs_saved,
                    "estimated_wall_saved_ms": self.estimated_wall_saved_ms,
                },
                separators=(",", ":"),
            )
        ]
        for t in self.trials:
            lines.append(
                json.dumps(
                    {
                        "kind": "trial",
                        "trial_id": t.trial_id,
                        "first_positive_epoch": t.first_positive_epoch,
                        "triggering_indicators": t.triggering_indicators,
                        "decision": t.decision,
                        "epochs_run": t.epochs_run,
                        "epochs_saved": t.epochs_saved,
                        "wall_saved_ms": t.wall_saved_ms,
                    },
                    separators=(",", ":"),
                )
            )
        lines.append(
            json.dumps(
                {"kind": "aggregate", "indicator_counts": self.indicator_counts},
                separators=(",", ":"),
            )
        )
        for w in self.warnings:
            lines.append(json.dumps({"kind": "warning", "message": w}, separators=(",", ":")))
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        """Indicator columns, one row per corpus (bad-trial claim counts)."""
        header = "indicator  " + "".join(f"{name:>6}" for name in INDICATORS)
        counts = "claimed    " + "".join(
            f"{self.indicator_counts.get(name, 0):>6}" for name in INDICATORS
        )
        footer = (
            f"trials={len(self.trials)} epochs_saved={self.estimated_epochs_saved} "
            f"wall_saved_ms={self.estimated_wall_saved_ms} mode={self.mode}"
        )
        return "\n".join([header, counts, footer])


def _scan_combined(trace: TrialTrace, cfg: IndicatorConfig):
    """First epoch where the combined diagnosis would terminate."""
    for epoch in range(cfg.min_epochs_before_diagnosis, len(trace.epochs)):
        report = diagnose(trace, epoch, cfg)
        if report.decision is not Decision.CONTINUE:
            return epoch, [v.indicator for v in report.positives], report.decision.value
    return None, [], Decision.CONTINUE.value

def _scan_isolated(trace: TrialTrace, cfg: IndicatorConfig) -> dict[str, int]:
    """First positive epoch per indicator, each evaluated in isolation."""
    first: dict[str, int] = {}
    for epoch in range(cfg.min_epochs_before_diagnosis, len(trace.epochs)):
        pending = [n for n in INDICATORS if n not in first]
        if not pending:
            break
        report = diagnose(trace, epoch, cfg)
        for verdict in report.verdicts:
            if verdict.positive and verdict.indicator not in first:
                first[verdict.indicator] = epoch
    return first


def replay_trace(trace: TrialTrace, cfg: IndicatorConfig, mode: str) -> TrialReplay:
    epochs_run = len(trace.epochs)
    first_epoch, inds, decision = _scan_combined(trace, cfg)
    if mode == "per_indicator":
        isolated = _scan_isolated(trace, cfg)
        triggering = sorted(isolated, key=lambda n: (isolated[n], INDICATORS.index(n)))
    else:
        triggering = inds
    epochs_saved = 0
    wall_saved = 0
    if first_epoch is not None:
        epochs_saved = epochs_run - (first_epoch + 1)
        if epochs_saved > 0 and trace.epochs:
            wall_saved = trace.epochs[-1].wall_ms - trace.epochs[first_epoch].wall_ms
    return TrialReplay(
        trial_id=trace.meta.trial_id,
        first_positive_epoch=first_epoch,
        triggering_indicators=list(triggering),
        decision=decision,
        epochs_run=epochs_run,
        epochs_saved=max(0, epochs_saved),
        wall_saved_ms=max(0, wall_saved),
    )


def trace_files(trace_dir) -> list[Path]:
    return sorted(Path(trace_dir).glob("*.trace.jsonl"))


def replay(trace_dir, cfg: IndicatorConfig | None = None, mode: str = "combined") -> ReplayReport:
    """Replay every trace in a directory through the checker.

    Unreadable traces are skipped and reported as warnings; replay is a
    forensic tool, not a validator.
    """
    if mode not in MODES:
        raise InvalidInput(f"unknown replay mode {mode!r}")
    cfg = cfg or IndicatorConfig()
    report = ReplayReport(mode=mode, indicator_counts={name: 0 for name in INDICATORS})
    for path in trace_files(trace_dir):
        try:
            trace = read_trace_file(path)
        except (BttError, OSError) as exc:
            report.warnings.append(f"{path.name}: {exc}")
            continue
        trial = replay_trace(trace, cfg, mode)
        report.trials.append(trial)
        for name in trial.triggering_indicators:
            report.indicator_counts[name] += 1
    return report


@dataclass
class CalibrationResult:
    cfg: IndicatorConfig
    false_positive_rate: float
    false_negative_rate: float
    epochs_saved: int


def calibrate(
    trace_dir,
    labeled_outcomes: dict[str, str],
    cfg_grid: list[IndicatorConfig],
) -> list[CalibrationResult]:
    """Grade candidate indicator configs against labeled trial outcomes.

    A trial counts as predicted-bad when the combined replay decision is a
    malign termination; benign (no-more-gain) stops are not eliminations.
    Results are ranked by false positive rate, then by epochs saved.
    """
    if not cfg_grid:
        raise InvalidInput("empty config grid")
    for label in labeled_outcomes.values():
        if label not in ("good", "bad"):
            raise InvalidInput(f"labels must be 'good' or 'bad', got {label!r}")
    results = []
    for cfg in cfg_grid:
        rep = replay(trace_dir, cfg, mode="combined")
        predicted_bad = {
            t.trial_id for t in rep.trials if t.decision == Decision.TERMINATE_BAD.value
        }
        good = {tid for tid, lab in labeled_outcomes.items() if lab == "good"}
        bad = {tid for tid, lab in labeled_outcomes.items() if lab == "bad"}
        fp = len(predicted_bad & good) / len(good) if good else 0.0
        fn = len(bad - predicted_bad) / len(bad) if bad else 0.0
        results.append(
            CalibrationResult(
                cfg=cfg,
                false_positive_rate=fp,
                false_negative_rate=fn,
                epochs_saved=rep.estimated_epochs_saved,
            )
        )
    results.sort(key=lambda r: (r.false_positive_rate, -r.epochs_saved))
    return results
