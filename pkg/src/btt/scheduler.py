"""Experiment orchestration: concurrent trials, streaming diagnosis, early stops.

The scheduler owns all mutable experiment state behind one serialized loop.
Trials run as cooperatively supervised programs that surface one epoch at a
time and honor a stop flag at epoch boundaries, so a stop request costs at
most the epoch already in flight.

Two clocks are supported. Simulated time drives trial progress from each
runner's deterministic per-epoch cost, which makes whole experiments
byte-reproducible (同 seed, same bytes) and lets CI exercise wall budgets.
Real time runs trials on worker threads with the checker isolated on its own
thread so diagnosis never blocks epoch production.
"""

from __future__ import annotations

import heapq
import json
import math
import queue
import random
import statistics
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator

from .errors import InvalidInput, NoSuchTrial, ParseError
from .indicators import Decision, DiagnosisReport, IndicatorConfig, diagnose
from .runner import EpochPayload, TrialRunner
from .space import HpConfig, SearchSpace, random_sample
from .trace import (
    EpochRecord,
    TraceFinal,
    TraceMeta,
    TraceWriter,
    TrialTrace,
    enc_num,
    dec_num,
)

POLICIES = ("none", "bttackler", "msr")
EVENT_KINDS = (
    "trial_started",
    "epoch_reported",
    "verdict",
    "stop_requested",
    "trial_finished",
    "budget_exhausted",
)


@dataclass(frozen=True)
class Budget:
    kind: str  # trials | wall | sim
    amount: int

    def __post_init__(self):
        if self.kind not in ("trials", "wall", "sim"):
            raise InvalidInput(f"unknown budget kind {self.kind!r}")
        if self.amount <= 0:
            raise InvalidInput("budget must be positive")

    @classmethod
    def parse(cls, text: str) -> "Budget":
        kind, _, amount = text.partition(":")
        amount = amount.rstrip()
        if amount.endswith("ms"):
            amount = amount[:-2]
        try:
            return cls(kind=kind, amount=int(amount))
        except ValueError:
            raise InvalidInput(f"cannot parse budget {text!r}") from None

    def __str__(self) -> str:
        return f"{self.kind}:{self.amount}"


@dataclass
class TrialState:
    trial_id: str
    config: HpConfig
    status: str = "pending"  # pending|running|completed|terminated|failed
    epochs_run: int = 0
    best_val_metric: float = math.nan
    last_val_metric: float = math.nan
    final_metric_for_sampler: float = math.nan
    termination_reason: str | None = None
    wall_ms: int = 0
    benign: bool = False
    finished_at_ms: int = 0


@dataclass(frozen=True)
class Event:
    ts: int
    seq: int
    kind: str
    payload: dict

    def to_json(self) -> str:
        obj = {"kind": self.kind, "ts": self.ts, "seq": self.seq, "payload": self.payload}
        return json.dumps(obj, separators=(",", ":"), allow_nan=False)


@dataclass
class ExperimentLog:
    experiment_id: str
    runner_name: str
    space: SearchSpace
    policy: str
    budget: Budget
    concurrency: int
    seed: int
    time_mode: str
    indicator_config: IndicatorConfig
    metric_mode: str
    created_unix_ms: int = 0
    events: list[Event] = field(default_factory=list)
    trials: list[TrialState] = field(default_factory=list)

    def trial(self, trial_id: str) -> TrialState:
        for t in self.trials:
            if t.trial_id == trial_id:
                return t
        raise NoSuchTrial(trial_id)

    # persistence -----------------------------------------------------------

    def save(self, out_dir) -> Path:
        path = Path(out_dir) / "experiment.jsonl"
        lines = [
            json.dumps(
                {
                    "kind": "experiment",
                    "experiment_id": self.experiment_id,
                    "runner": self.runner_name,
                    "policy": self.policy,
                    "budget": str(self.budget),
                    "concurrency": self.concurrency,
                    "seed": self.seed,
                    "time_mode": self.time_mode,
                    "metric_mode": self.metric_mode,
                    "created_unix_ms": self.created_unix_ms,
                    "indicator_config": self.indicator_config.to_dict(),
                    "space": self.space.to_dict(),
                },
                separators=(",", ":"),
                allow_nan=False,
            )
        ]
        lines += [ev.to_json() for ev in self.events]
        for t in self.trials:
            lines.append(
                json.dumps(
                    {
                        "kind": "trial_state",
                        "trial_id": t.trial_id,
                        "config": {k: enc_num(v) for k, v in sorted(t.config.values.items())},
                        "status": t.status,
                        "epochs_run": t.epochs_run,
                        "best_val_metric": enc_num(t.best_val_metric),
                        "last_val_metric": enc_num(t.last_val_metric),
                        "final_metric_for_sampler": enc_num(t.final_metric_for_sampler),
                        "termination_reason": t.termination_reason,
                        "wall_ms": t.wall_ms,
                        "benign": t.benign,
                        "finished_at_ms": t.finished_at_ms,
                    },
                    separators=(",", ":"),
                    allow_nan=False,
                )
            )
        path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
        return path

    @classmethod
    def load(cls, exp_dir) -> "ExperimentLog":
        path = Path(exp_dir)
        if path.is_dir():
            path = path / "experiment.jsonl"
        header = None
        events: list[Event] = []
        trials: list[TrialState] = []
        for i, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", i) from None
            kind = obj.get("kind")
            if kind == "experiment":
                header = obj
            elif kind in EVENT_KINDS:
                events.append(Event(ts=obj["ts"], seq=obj["seq"], kind=kind, payload=obj["payload"]))
            elif kind == "trial_state":
                trials.append(
                    TrialState(
                        trial_id=obj["trial_id"],
                        config=HpConfig({k: dec_num(v) if isinstance(v, str) and v in ("NaN", "Infinity", "-Infinity") else v for k, v in obj["config"].items()}),
                        status=obj["status"],
                        epochs_run=obj["epochs_run"],
                        best_val_metric=dec_num(obj["best_val_metric"]),
                        last_val_metric=dec_num(obj["last_val_metric"]),
                        final_metric_for_sampler=dec_num(obj["final_metric_for_sampler"]),
                        termination_reason=obj["termination_reason"],
                        wall_ms=obj["wall_ms"],
                        benign=obj["benign"],
                        finished_at_ms=obj["finished_at_ms"],
                    )
                )
            else:
                raise ParseError(f"unknown record kind {kind!r}", i)
        if header is None:
            raise ParseError("experiment log has no header", 1)
        return cls(
            experiment_id=header["experiment_id"],
            runner_name=header["runner"],
            space=SearchSpace.from_dict(header["space"]),
            policy=header["policy"],
            budget=Budget.parse(header["budget"]),
            concurrency=header["concurrency"],
            seed=header["seed"],
            time_mode=header["time_mode"],
            indicator_config=IndicatorConfig.from_dict(header["indicator_config"]),
            metric_mode=header["metric_mode"],
            created_unix_ms=header["created_unix_ms"],
            events=events,
            trials=trials,
        )


def median_stop_check(
    trial_metric_at_epoch: float,
    peer_metrics_at_epoch: list[float],
    metric_mode: str,
    min_peers: int = 5,
) -> bool:
    """Median stop rule: stop when strictly worse than the peers' median.

    Peers are completed trials' metrics at the same epoch; with fewer than
    ``min_peers`` completed trials the rule stays silent (warm-up guard).
    """
    if len(peer_metrics_at_epoch) < min_peers:
        return False
    med = statistics.median(peer_metrics_at_epoch)
    if metric_mode == "maximize":
        return trial_metric_at_epoch < med
    return trial_metric_at_epoch > med


# ---------------------------------------------------------------------------
# internal per-trial bookkeeping


@dataclass
class _Trial:
    state: TrialState
    program: Any = None
    iterator: Iterator[EpochPayload] | None = None
    writer: TraceWriter | None = None
    trace: TrialTrace | None = None
    stop_reason: str | None = None
    stop_benign: bool = False
    stop_event: threading.Event = field(default_factory=threading.Event)
    finished: bool = False

    @property
    def stop_requested(self) -> bool:
        return self.stop_reason is not None


class Scheduler:
    """One experiment run. Use :func:`run_experiment` unless you need hooks."""

    def __init__(
        self,
        space: SearchSpace,
        runner: TrialRunner,
        policy: str,
        budget: Budget,
        out_dir,
        concurrency: int = 8,
        seed: int = 0,
        indicator_config: IndicatorConfig | None = None,
        time_mode: str | None = None,
        experiment_id: str | None = None,
        checker_latency_ms: int = 0,
        min_peers: int = 5,
        observer: Callable[["Scheduler", Event], None] | None = None,
    ):
        if policy not in POLICIES:
            raise InvalidInput(f"unknown policy {policy!r}")
        if concurrency < 1:
            raise InvalidInput("concurrency must be >= 1")
        if time_mode is None:
            time_mode = {"sim": "sim", "wall": "real", "trials": "sim"}[budget.kind]
        if time_mode not in ("sim", "real"):
            raise InvalidInput(f"unknown time mode {time_mode!r}")
        if budget.kind == "sim" and time_mode != "sim":
            raise InvalidInput("sim budgets require simulated time")
        if budget.kind == "wall" and time_mode != "real":
            raise InvalidInput("wall budgets require real time")
        self.space = space
        self.runner = runner
        self.policy = policy
        self.budget = budget
        self.concurrency = concurrency
        self.seed = seed
        self.cfg = indicator_config or IndicatorConfig()
        self.time_mode = time_mode
        self.out_dir = Path(out_dir)
        self.checker_latency_ms = checker_latency_ms
        self.min_peers = min_peers
        self.observer = observer
        self.log = ExperimentLog(
            experiment_id=experiment_id or f"{runner.name}-{policy}-s{seed}",
            runner_name=runner.name,
            space=space,
            policy=policy,
            budget=budget,
            concurrency=concurrency,
            seed=seed,
            time_mode=time_mode,
            indicator_config=self.cfg,
            metric_mode=runner.metric_mode,
            created_unix_ms=0 if time_mode == "sim" else int(time.time() * 1000),
        )
        self._rng = random.Random(seed)
        self._trials: dict[str, _Trial] = {}
        self._started = 0
        self._running = 0
        self._seq = 0
        self._budget_exhausted = False
        self._completed_val_by_epoch: dict[int, list[float]] = {}
        self._now_ms = 0

    # ------------------------------------------------------------------ util

    def _emit(self, kind: str, payload: dict) -> Event:
        ev = Event(ts=self._now_ms, seq=self._seq, kind=kind, payload=payload)
        self._seq += 1
        self.log.events.append(ev)
        if self.observer is not None:
            self.observer(self, ev)
        return ev

    def _train_seed(self, index: int) -> int:
        return (self.seed * 1_000_003 + 7_919 * index) % 2**31

    def _may_start_more(self) -> bool:
        if self._budget_exhausted:
            return False
        if self.budget.kind == "trials" and self._started >= self.budget.amount:
            return False
        if self.budget.kind in ("sim", "wall") and self._now_ms >= self.budget.amount:
            return False
        return True

    def _start_trial(self) -> _Trial | None:
        index = self._started
        self._started += 1
        trial_id = f"t{index:04d}"
        config = random_sample(self.space, self._rng)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        try:
            program = self.runner.start(trial_id, config, self._train_seed(index))
        except Exception as exc:
            meta = TraceMeta(
                trial_id=trial_id,
                config=dict(config.values),
                max_epoch=1,
                created_unix_ms=self._now_ms if self.time_mode == "sim" else int(time.time() * 1000),
            )
            trial = _Trial(
                state=TrialState(trial_id=trial_id, config=config, status="running"),
                writer=TraceWriter(self.out_dir / f"{trial_id}.trace.jsonl", meta),
                trace=TrialTrace(meta=meta),
            )
            self._trials[trial_id] = trial
            self._running += 1
            self._emit("trial_started", {"trial_id": trial_id, "config": {k: enc_num(v) for k, v in sorted(config.values.items())}})
            self._finalize(trial, "failed", f"error: {exc}")
            return None
        meta = TraceMeta(
            trial_id=trial_id,
            config=dict(config.values),
            max_epoch=program.max_epoch,
            created_unix_ms=self._now_ms if self.time_mode == "sim" else int(time.time() * 1000),
        )
        trial = _Trial(
            state=TrialState(trial_id=trial_id, config=config, status="running"),
            program=program,
            writer=TraceWriter(self.out_dir / f"{trial_id}.trace.jsonl", meta),
            trace=TrialTrace(meta=meta),
        )
        self._trials[trial_id] = trial
        self._running += 1
        self._emit("trial_started", {"trial_id": trial_id, "config": {k: enc_num(v) for k, v in sorted(config.values.items())}})
        return trial

    def request_stop(self, trial_id: str, reason: str, benign: bool = False) -> bool:
        """Ask a running trial to stop at its next epoch boundary.

        Returns True when the request took effect, False when the trial had
        already finished or already has a stop pending (both no-ops).
        Unknown ids raise NoSuchTrial.
        """
        trial = self._trials.get(trial_id)
        if trial is None:
            raise NoSuchTrial(trial_id)
        if trial.finished or trial.stop_requested:
            return False
        trial.stop_reason = reason
        trial.stop_benign = benign
        trial.stop_event.set()
        self._emit("stop_requested", {"trial_id": trial_id, "reason": reason})
        return True

    def _record_epoch(self, trial: _Trial, epoch: int, payload: EpochPayload, wall_ms: int) -> EpochRecord:
        rec = EpochRecord(
            trial_id=trial.state.trial_id,
            epoch=epoch,
            train_loss=payload.train_loss,
            val_metric=payload.val_metric,
            metric_mode=self.runner.metric_mode,
            wall_ms=wall_ms,
        )
        trial.writer.write_epoch(rec, payload.layers)
        trial.trace.epochs.append(rec)
        trial.trace.layers.extend(payload.layers)
        st = trial.state
        st.epochs_run = epoch + 1
        st.last_val_metric = payload.val_metric
        st.wall_ms = wall_ms
        self._emit(
            "epoch_reported",
            {
                "trial_id": st.trial_id,
                "epoch": epoch,
                "train_loss": enc_num(payload.train_loss),
                "val_metric": enc_num(payload.val_metric),
                "wall_ms": wall_ms,
            },
        )
        return rec

    def _apply_verdict(self, trial: _Trial, report: DiagnosisReport) -> None:
        if trial.finished or trial.stop_requested:
            return
        if report.decision is Decision.CONTINUE:
            return
        positives = [v.indicator for v in report.positives]
        self._emit(
            "verdict",
            {
                "trial_id": trial.state.trial_id,
                "epoch": report.epoch,
                "decision": report.decision.value,
                "positives": positives,
                "evidence": [v.evidence for v in report.positives],
            },
        )
        self.request_stop(
            trial.state.trial_id,
            reason=",".join(positives),
            benign=report.decision is Decision.TERMINATE_BENIGN,
        )

    def _maybe_msr_stop(self, trial: _Trial, epoch: int, val_metric: float) -> None:
        peers = self._completed_val_by_epoch.get(epoch, [])
        if median_stop_check(val_metric, peers, self.runner.metric_mode, self.min_peers):
            self.request_stop(trial.state.trial_id, reason="msr")

    def _finalize(self, trial: _Trial, status: str, reason: str) -> None:
        st = trial.state
        trial.finished = True
        self._running -= 1
        st.status = status
        st.termination_reason = reason or None
        st.benign = trial.stop_benign and status == "terminated"
        st.best_val_metric = trial.trace.best_val_metric()
        st.finished_at_ms = self._now_ms
        if status == "completed":
            st.final_metric_for_sampler = st.best_val_metric
            for rec in trial.trace.epochs:
                self._completed_val_by_epoch.setdefault(rec.epoch, []).append(rec.val_metric)
        elif status == "terminated" and reason not in ("budget",) and not st.benign:
            # pessimistic stop: the last evaluation stands in for the final one
            st.final_metric_for_sampler = st.last_val_metric
        elif status == "failed":
            st.final_metric_for_sampler = math.nan
        else:
            st.final_metric_for_sampler = st.best_val_metric
        fin = TraceFinal(
            status=status,
            reason=reason,
            best_val_metric=st.best_val_metric,
            epochs_run=st.epochs_run,
        )
        trial.writer.write_final(fin)
        trial.writer.close()
        trial.trace.final = fin
        self.log.trials.append(st)
        self._emit(
            "trial_finished",
            {
                "trial_id": st.trial_id,
                "status": status,
                "reason": reason,
                "epochs_run": st.epochs_run,
                "best_val_metric": enc_num(st.best_val_metric),
                "last_val_metric": enc_num(st.last_val_metric),
                "final_metric_for_sampler": enc_num(st.final_metric_for_sampler),
                "benign": st.benign,
            },
        )

    # ------------------------------------------------------------- execution

    def run(self) -> ExperimentLog:
        if self.time_mode == "sim":
            self._run_sim()
        else:
            self._run_real()
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.log.save(self.out_dir)
        return self.log

    # simulated time: a deterministic discrete-event loop

    def _run_sim(self) -> None:
        heap: list[tuple[int, int, Callable[[], None]]] = []
        push_seq = iter(range(1 << 62))

        def push(ts: int, fn: Callable[[], None]) -> None:
            heapq.heappush(heap, (ts, next(push_seq), fn))

        def schedule_next_epoch(trial: _Trial, epoch: int) -> None:
            try:
                payload = next(trial.iterator)
            except StopIteration:
                self._finalize(trial, "completed", "")
                start_more()
                return
            except Exception as exc:  # runner crash: trial fails, run continues
                self._finalize(trial, "failed", f"error: {exc}")
                start_more()
                return
            cost = max(1, payload.cost_ms)
            done_ts = self._now_ms + cost
            push(done_ts, lambda: complete_epoch(trial, epoch, payload, done_ts, cost))

        def complete_epoch(
            trial: _Trial, epoch: int, payload: EpochPayload, ts: int, cost: int
        ) -> None:
            self._now_ms = ts
            wall = cost if epoch == 0 else trial.trace.epochs[-1].wall_ms + cost
            self._record_epoch(trial, epoch, payload, wall)
            if trial.stop_requested:
                self._finalize(trial, "terminated", trial.stop_reason)
                start_more()
                return
            if self._budget_exhausted:
                self._finalize(trial, "terminated", "budget")
                start_more()
                return
            if self.policy == "bttackler" and epoch >= self.cfg.min_epochs_before_diagnosis:
                if self.checker_latency_ms <= 0:
                    report = diagnose(trial.trace, epoch, self.cfg)
                    self._apply_verdict(trial, report)
                    if trial.stop_requested:
                        self._finalize(trial, "terminated", trial.stop_reason)
                        start_more()
                        return
                else:
                    push(
                        ts + self.checker_latency_ms,
                        lambda: deliver_verdict(trial, epoch, ts + self.checker_latency_ms),
                    )
            elif self.policy == "msr":
                self._maybe_msr_stop(trial, epoch, payload.val_metric)
                if trial.stop_requested:
                    self._finalize(trial, "terminated", trial.stop_reason)
                    start_more()
                    return
            schedule_next_epoch(trial, epoch + 1)

        def deliver_verdict(trial: _Trial, epoch: int, ts: int) -> None:
            self._now_ms = ts
            if trial.finished or trial.stop_requested:
                return
            report = diagnose(trial.trace, epoch, self.cfg)
            self._apply_verdict(trial, report)

        def start_more() -> None:
            while self._running < self.concurrency and self._may_start_more():
                trial = self._start_trial()
                if trial is None:
                    continue
                trial.iterator = trial.program.epochs()
                schedule_next_epoch(trial, 0)

        def budget_wall() -> None:
            self._now_ms = self.budget.amount
            if not self._budget_exhausted:
                self._budget_exhausted = True
                self._emit("budget_exhausted", {})
                for trial in self._trials.values():
                    if not trial.finished and not trial.stop_requested:
                        trial.stop_reason = "budget"

        if self.budget.kind == "sim":
            push(self.budget.amount, budget_wall)
        start_more()
        while heap:
            ts, _, fn = heapq.heappop(heap)
            fn()

    # real time: worker threads feeding a serialized scheduler loop

    def _run_real(self) -> None:
        msgs: queue.Queue = queue.Queue()
        start_ns = time.monotonic_ns()

        def now_ms() -> int:
            return (time.monotonic_ns() - start_ns) // 1_000_000

        def worker(trial: _Trial) -> None:
            epoch = 0
            status, reason = "completed", ""
            trial_t0 = time.monotonic_ns()
            try:
                it = trial.program.epochs()
                while True:
                    if trial.stop_event.is_set():
                        status, reason = "terminated", trial.stop_reason or "stopped"
                        break
                    try:
                        payload = next(it)
                    except StopIteration:
                        break
                    wall = (time.monotonic_ns() - trial_t0) // 1_000_000
                    msgs.put(("epoch", trial, epoch, payload, now_ms(), wall))
                    epoch += 1
            except Exception as exc:
                status, reason = "failed", f"error: {exc}"
            msgs.put(("done", trial, status, reason, now_ms()))

        workers = ThreadPoolExecutor(max_workers=self.concurrency, thread_name_prefix="trial")
        checker = (
            ThreadPoolExecutor(max_workers=1, thread_name_prefix="checker")
            if self.policy == "bttackler"
            else None
        )

        def submit_diagnosis(trial: _Trial, epoch: int) -> None:
            trace_snapshot = TrialTrace(
                meta=trial.trace.meta,
                epochs=list(trial.trace.epochs),
                layers=list(trial.trace.layers),
            )

            def job() -> None:
                try:
                    report = diagnose(trace_snapshot, epoch, self.cfg)
                except Exception:
                    return
                msgs.put(("verdict", trial, report, now_ms()))

            checker.submit(job)

        def start_more() -> None:
            while self._running < self.concurrency and self._may_start_more():
                trial = self._start_trial()
                if trial is not None:
                    workers.submit(worker, trial)

        def check_budget() -> None:
            if (
                self.budget.kind == "wall"
                and not self._budget_exhausted
                and now_ms() >= self.budget.amount
            ):
                self._budget_exhausted = True
                self._emit("budget_exhausted", {})
                for t in self._trials.values():
                    if not t.finished and not t.stop_requested:
                        t.stop_reason = "budget"
                        t.stop_event.set()

        self._now_ms = 0
        start_more()
        try:
            while self._running > 0:
                try:
                    msg = msgs.get(timeout=0.05)
                except queue.Empty:
                    self._now_ms = now_ms()
                    check_budget()
                    continue
                kind = msg[0]
                if kind == "epoch":
                    _, trial, epoch, payload, ts, wall = msg
                    self._now_ms = ts
                    if trial.finished:
                        continue
                    self._record_epoch(trial, epoch, payload, wall)
                    if self.policy == "bttackler" and epoch >= self.cfg.min_epochs_before_diagnosis:
                        if not trial.stop_requested:
                            submit_diagnosis(trial, epoch)
                    elif self.policy == "msr":
                        self._maybe_msr_stop(trial, epoch, payload.val_metric)
                elif kind == "verdict":
                    _, trial, report, ts = msg
                    self._now_ms = ts
                    self._apply_verdict(trial, report)
                else:  # done
                    _, trial, status, reason, ts = msg
                    self._now_ms = ts
                    if status == "terminated" and trial.stop_reason:
                        reason = trial.stop_reason
                    self._finalize(trial, status, reason)
                    start_more()
                self._now_ms = now_ms()
                check_budget()
        finally:
            workers.shutdown(wait=True)
            if checker is not None:
                checker.shutdown(wait=True)

    # convenience ------------------------------------------------------------

    @property
    def trials(self) -> dict[str, _Trial]:
        return self._trials


def run_experiment(
    space: SearchSpace,
    runner: TrialRunner,
    policy: str,
    budget: Budget | str,
    out_dir,
    concurrency: int = 8,
    seed: int = 0,
    indicator_config: IndicatorConfig | None = None,
    time_mode: str | None = None,
    experiment_id: str | None = None,
    checker_latency_ms: int = 0,
    min_peers: int = 5,
    observer: Callable[[Scheduler, Event], None] | None = None,
) -> ExperimentLog:
    """Run one HPO experiment and persist traces plus the event log."""
    if isinstance(budget, str):
        budget = Budget.parse(budget)
    sched = Scheduler(
        space=space,
        runner=runner,
        policy=policy,
        budget=budget,
        out_dir=out_dir,
        concurrency=concurrency,
        seed=seed,
        indicator_config=indicator_config,
        time_mode=time_mode,
        experiment_id=experiment_id,
        checker_latency_ms=checker_latency_ms,
        min_peers=min_peers,
        observer=observer,
    )
    return sched.run()
