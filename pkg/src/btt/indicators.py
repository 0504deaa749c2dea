"""Seven quality indicators and the per-epoch trial diagnosis.

Malign indicators (AGV, EAG, ERG, PLC, LAR, ULC) flag training pathologies;
NMG is benign: it flags trials that cannot gain from further training, which
are terminated but stay eligible as ranking candidates. EAG/ERG/PLC apply in
the early stage of training, ULC/NMG in the late stage, AGV/LAR everywhere.

All thresholds are configuration with conservative defaults: they should only
trip on severe problems, because a false positive eliminates a potentially
good configuration.
"""

from __future__ import annotations

import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from enum import Enum
from typing import Sequence

from .errors import InvalidInput, InvariantViolation
from .stats import StatVector
from .trace import TrialTrace

INDICATORS = ("AGV", "EAG", "ERG", "PLC", "LAR", "ULC", "NMG")
BENIGN_INDICATORS = frozenset({"NMG"})


@dataclass(frozen=True)
class IndicatorConfig:
    """Thresholds and stage geometry for the quality indicators."""

    agv_abs_bound: float = 1e4
    eag_upper: float = 10.0
    erg_lower: float = 0.1
    plc_ratio_threshold: float = 1e-3
    lar_zero_threshold: float = 0.9
    ulc_fluct_tol: float = 0.10
    window_fraction: float = 0.2
    early_stage_fraction: float = 0.2
    late_stage_fraction: float = 0.5
    min_epochs_before_diagnosis: int = 2

    def __post_init__(self):
        if not (self.agv_abs_bound > 0 and self.eag_upper > 0 and self.erg_lower > 0):
            raise InvalidInput("bounds must be positive")
        if not self.erg_lower < 1 < self.eag_upper:
            raise InvalidInput("need erg_lower < 1 < eag_upper")
        if not 0 < self.plc_ratio_threshold < 1:
            raise InvalidInput("plc_ratio_threshold must be in (0,1)")
        if not 0 < self.lar_zero_threshold < 1:
            raise InvalidInput("lar_zero_threshold must be in (0,1)")
        if self.ulc_fluct_tol <= 0:
            raise InvalidInput("ulc_fluct_tol must be positive")
        if not 0 < self.window_fraction < 1:
            raise InvalidInput("window_fraction must be in (0,1)")
        if not self.early_stage_fraction <= self.late_stage_fraction:
            raise InvalidInput("early_stage_fraction must not exceed late_stage_fraction")
        if self.min_epochs_before_diagnosis < 0:
            raise InvalidInput("min_epochs_before_diagnosis must be nonnegative")

    # stage geometry -------------------------------------------------------

    def early_bound(self, max_epoch: int) -> int:
        """First epoch index past the early stage."""
        return max(2, math.ceil(self.early_stage_fraction * max_epoch))

    def late_bound(self, max_epoch: int) -> int:
        """First epoch index of the late stage."""
        return math.floor(self.late_stage_fraction * max_epoch)

    def window(self, max_epoch: int) -> int:
        """Adaptive window size for the late-stage loss indicators."""
        return max(3, math.ceil(self.window_fraction * max_epoch))

    # (de)serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "IndicatorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInput(f"unknown indicator config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "IndicatorConfig":
        text = open(path, "rb").read()
        name = str(path)
        if name.endswith(".toml"):
            try:
                import tomllib  # type: ignore[import-not-found]
            except ModuleNotFoundError:
                import tomli as tomllib
            data = tomllib.loads(text.decode("utf-8"))
        else:
            data = json.loads(text.decode("utf-8"))
        if not isinstance(data, dict):
            raise InvalidInput(f"{name}: config must be a table/object")
        return cls.from_dict(data)


class Stage(str, Enum):
    EARLY = "early"
    MID = "mid"
    LATE = "late"


class Decision(str, Enum):
    CONTINUE = "continue"
    TERMINATE_BAD = "terminate_bad"
    TERMINATE_BENIGN = "terminate_benign"


@dataclass(frozen=True)
class IndicatorVerdict:
    indicator: str
    positive: bool
    benign: bool
    epoch: int
    evidence: str

    def __post_init__(self):
        if self.benign != (self.indicator in BENIGN_INDICATORS):
            raise InvalidInput(f"benign flag inconsistent for {self.indicator}")


@dataclass(frozen=True)
class DiagnosisReport:
    trial_id: str
    epoch: int
    verdicts: tuple[IndicatorVerdict, ...]
    decision: Decision

    @property
    def positives(self) -> tuple[IndicatorVerdict, ...]:
        return tuple(v for v in self.verdicts if v.positive)


def stage_of(epoch: int, max_epoch: int, cfg: IndicatorConfig) -> Stage:
    if not 0 <= epoch < max_epoch:
        raise InvalidInput(f"epoch {epoch} outside [0, {max_epoch})")
    if epoch < cfg.early_bound(max_epoch):
        return Stage.EARLY
    if epoch >= cfg.late_bound(max_epoch):
        return Stage.LATE
    return Stage.MID


def _verdict(ind: str, positive: bool, epoch: int, evidence: str) -> IndicatorVerdict:
    return IndicatorVerdict(
        indicator=ind,
        positive=positive,
        benign=ind in BENIGN_INDICATORS,
        epoch=epoch,
        evidence=evidence,
    )


# ---------------------------------------------------------------------------
# AGV: abnormal gradient values


def agv_check(
    grad_layer_stats: Sequence[StatVector], cfg: IndicatorConfig, epoch: int = 0
) -> IndicatorVerdict:
    """Positive when any gradient statistic is non-finite or beyond the bound."""
    if not grad_layer_stats:
        raise InvalidInput("agv_check needs at least one layer")
    for i, sv in enumerate(grad_layer_stats):
        for name in ("avg", "min", "max", "median"):
            v = getattr(sv, name)
            if not math.isfinite(v):
                return _verdict("AGV", True, epoch, f"layer {i}: {name} is {v}")
        extreme = max(abs(sv.min), abs(sv.max))
        if extreme > cfg.agv_abs_bound:
            return _verdict(
                "AGV", True, epoch, f"layer {i}: |grad| {extreme:.3g} > {cfg.agv_abs_bound:.3g}"
            )
    return _verdict("AGV", False, epoch, "gradients finite and within bound")


# ---------------------------------------------------------------------------
# EAG / ERG: inter-layer gradient amplification


def layer_grad_magnitudes(grad_layer_stats: Sequence[StatVector]) -> list[float]:
    """Per-layer gradient magnitude proxy: |median| of the stored statistics.

    Input must be ordered input-most (index 0) to output-most.
    """
    return [abs(sv.median) for sv in grad_layer_stats]


def _adjacent_amplifications(magnitudes: Sequence[float]) -> list[float]:
    # backprop direction: earlier-layer gradient over later-layer gradient;
    # zero denominators are skipped, not treated as infinite
    amps = []
    for k in range(len(magnitudes) - 1):
        denom = magnitudes[k + 1]
        if denom == 0 or not math.isfinite(denom) or not math.isfinite(magnitudes[k]):
            continue
        amps.append(magnitudes[k] / denom)
    return amps


def eag_check(
    magnitudes: Sequence[float], cfg: IndicatorConfig, epoch: int = 0
) -> IndicatorVerdict:
    """Positive when the median adjacent-layer amplification exceeds the bound."""
    if len(magnitudes) < 2:
        return _verdict("EAG", False, epoch, "insufficient layers")
    amps = _adjacent_amplifications(magnitudes)
    if not amps:
        return _verdict("EAG", False, epoch, "no measurable amplification pairs")
    med = statistics.median(amps)
    if med > cfg.eag_upper:
        return _verdict("EAG", True, epoch, f"median amplification {med:.3g} > {cfg.eag_upper:.3g}")
    return _verdict("EAG", False, epoch, f"median amplification {med:.3g}")


def erg_check(
    magnitudes: Sequence[float], cfg: IndicatorConfig, epoch: int = 0
) -> IndicatorVerdict:
    """Positive when the median adjacent-layer amplification falls below the bound."""
    if len(magnitudes) < 2:
        return _verdict("ERG", False, epoch, "insufficient layers")
    amps = _adjacent_amplifications(magnitudes)
    if not amps:
        return _verdict("ERG", False, epoch, "no measurable amplification pairs")
    med = statistics.median(amps)
    if med < cfg.erg_lower:
        return _verdict("ERG", True, epoch, f"median amplification {med:.3g} < {cfg.erg_lower:.3g}")
    return _verdict("ERG", False, epoch, f"median amplification {med:.3g}")


# ---------------------------------------------------------------------------
# PLC: passive loss changes


def plc_check(
    train_losses: Sequence[float], cfg: IndicatorConfig, epoch: int = 0
) -> IndicatorVerdict:
    """Positive when early loss movement is negligible next to the initial loss."""
    if len(train_losses) < 3:
        return _verdict("PLC", False, epoch, "insufficient history")
    loss0 = train_losses[0]
    if not math.isfinite(loss0) or loss0 <= 0:
        return _verdict("PLC", False, epoch, "undefined baseline")
    gaps = [abs(train_losses[i + 1] - train_losses[i]) for i in range(len(train_losses) - 1)]
    if not all(math.isfinite(g) for g in gaps):
        return _verdict("PLC", False, epoch, "undefined baseline")
    ratio = (sum(gaps) / len(gaps)) / loss0
    if ratio < cfg.plc_ratio_threshold:
        return _verdict(
            "PLC", True, epoch, f"mean loss change {ratio:.3g} of initial loss < {cfg.plc_ratio_threshold:.3g}"
        )
    return _verdict("PLC", False, epoch, f"mean loss change {ratio:.3g} of initial loss")


# ---------------------------------------------------------------------------
# LAR: low activation ratio


def lar_check(
    act_layer_stats: Sequence[StatVector], cfg: IndicatorConfig, epoch: int = 0
) -> IndicatorVerdict:
    """Positive when any layer's share of exactly-zero activations is too high."""
    if not act_layer_stats:
        return _verdict("LAR", False, epoch, "no activation data")
    for i, sv in enumerate(act_layer_stats):
        if sv.zero_ratio > cfg.lar_zero_threshold:
            return _verdict(
                "LAR", True, epoch, f"layer {i}: zero ratio {sv.zero_ratio:.3g} > {cfg.lar_zero_threshold:.3g}"
            )
    worst = max(sv.zero_ratio for sv in act_layer_stats)
    return _verdict("LAR", False, epoch, f"max zero ratio {worst:.3g}")


# ---------------------------------------------------------------------------
# ULC / NMG: late-stage loss behavior


def _linear_fit(ys: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares fit of ys against 0..n-1; returns (slope, intercept, rmse)."""
    n = len(ys)
    xs = range(n)
    xbar = (n - 1) / 2
    ybar = sum(ys) / n
    sxx = sum((x - xbar) ** 2 for x in xs)
    sxy = sum((x - xbar) * (y - ybar) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    rss = sum((y - (intercept + slope * x)) ** 2 for x, y in zip(xs, ys))
    return slope, intercept, math.sqrt(rss / n)


def ulc_check(
    train_losses: Sequence[float], max_epoch: int, cfg: IndicatorConfig, epoch: int = 0
) -> IndicatorVerdict:
    """Positive when late-stage loss fluctuates or rises instead of converging."""
    w = cfg.window(max_epoch)
    if len(train_losses) < w:
        return _verdict("ULC", False, epoch, "insufficient history")
    window = list(train_losses[-w:])
    if not all(math.isfinite(v) for v in window):
        return _verdict("ULC", False, epoch, "non-finite loss in window")
    mean = sum(window) / w
    if mean == 0:
        return _verdict("ULC", False, epoch, "degenerate window")
    slope, _, rmse = _linear_fit(window)
    fluct = rmse / abs(mean)
    if fluct > cfg.ulc_fluct_tol:
        return _verdict("ULC", True, epoch, f"fluctuation {fluct:.3g} > {cfg.ulc_fluct_tol:.3g}")
    rise = slope * (w - 1)
    if slope > 0 and rise > 0.01 * abs(mean):
        return _verdict("ULC", True, epoch, f"loss rising: {rise:.3g} over window")
    return _verdict("ULC", False, epoch, f"fluctuation {fluct:.3g}, slope {slope:.3g}")


def nmg_check(
    train_losses: Sequence[float], max_epoch: int, cfg: IndicatorConfig, epoch: int = 0
) -> IndicatorVerdict:
    """Positive (benign) when the recent window never touches the global loss minimum."""
    w = cfg.window(max_epoch)
    if len(train_losses) < w + 1:
        return _verdict("NMG", False, epoch, "insufficient history")
    if not all(math.isfinite(v) for v in train_losses):
        return _verdict("NMG", False, epoch, "non-finite loss")
    window_min = min(train_losses[-w:])
    overall_min = min(train_losses)
    if window_min > overall_min:
        return _verdict(
            "NMG", True, epoch, f"window min {window_min:.6g} > overall min {overall_min:.6g}"
        )
    return _verdict("NMG", False, epoch, "window contains the overall minimum")


# ---------------------------------------------------------------------------
# diagnosis


def active_indicators(epoch: int, max_epoch: int, cfg: IndicatorConfig) -> tuple[str, ...]:
    """Indicators evaluated at this epoch, in fixed order.

    AGV and LAR run at every stage; EAG/ERG in the early stage; PLC once at
    the final early-stage epoch; ULC/NMG in the late stage.
    """
    stage = stage_of(epoch, max_epoch, cfg)
    names = ["AGV"]
    if stage is Stage.EARLY:
        names += ["EAG", "ERG"]
        if epoch == cfg.early_bound(max_epoch) - 1:
            names.append("PLC")
    names.append("LAR")
    if stage is Stage.LATE:
        names += ["ULC", "NMG"]
    return tuple(names)


def diagnose(
    trace: TrialTrace,
    epoch: int,
    cfg: IndicatorConfig,
    parallel: bool = False,
) -> DiagnosisReport:
    """Evaluate the indicators active at this epoch's stage over the trace prefix.

    Pure in (trace prefix, epoch, cfg); with ``parallel`` the per-indicator
    checks fan out to threads and join, with results identical to sequential
    evaluation.
    """
    if epoch < cfg.min_epochs_before_diagnosis:
        raise InvalidInput(
            f"diagnosis starts at epoch {cfg.min_epochs_before_diagnosis}, got {epoch}"
        )
    if len(trace.epochs) <= epoch:
        raise InvariantViolation(
            f"trace has {len(trace.epochs)} epoch records; cannot diagnose epoch {epoch}"
        )
    max_epoch = trace.meta.max_epoch
    losses = trace.train_losses(upto_epoch=epoch)
    grad_stats = trace.layer_stats(epoch, "grad")
    act_stats = trace.layer_stats(epoch, "act")
    # The inter-layer amplification chain is the hidden stack; the output
    # head's gradient median is structurally larger (loss-facing layer), so
    # including it would bias every shallow net toward an ERG positive.
    magnitudes = layer_grad_magnitudes(grad_stats[:-1] if len(grad_stats) > 1 else grad_stats)

    def run_check(name: str) -> IndicatorVerdict:
        if name == "AGV":
            if not grad_stats:
                return _verdict("AGV", False, epoch, "no gradient data")
            return agv_check(grad_stats, cfg, epoch)
        if name == "EAG":
            if not grad_stats:
                return _verdict("EAG", False, epoch, "no gradient data")
            return eag_check(magnitudes, cfg, epoch)
        if name == "ERG":
            if not grad_stats:
                return _verdict("ERG", False, epoch, "no gradient data")
            return erg_check(magnitudes, cfg, epoch)
        if name == "PLC":
            return plc_check(losses, cfg, epoch)
        if name == "LAR":
            return lar_check(act_stats, cfg, epoch)
        if name == "ULC":
            return ulc_check(losses, max_epoch, cfg, epoch)
        if name == "NMG":
            return nmg_check(losses, max_epoch, cfg, epoch)
        raise InvalidInput(f"unknown indicator {name}")

    names = active_indicators(epoch, max_epoch, cfg)
    if parallel:
        with ThreadPoolExecutor(max_workers=len(names)) as pool:
            verdicts = tuple(pool.map(run_check, names))
    else:
        verdicts = tuple(run_check(n) for n in names)

    if any(v.positive and not v.benign for v in verdicts):
        decision = Decision.TERMINATE_BAD
    elif any(v.positive and v.benign for v in verdicts):
        decision = Decision.TERMINATE_BENIGN
    else:
        decision = Decision.CONTINUE
    return DiagnosisReport(
        trial_id=trace.meta.trial_id, epoch=epoch, verdicts=verdicts, decision=decision
    )
