"""Scheduler: budgets, policies, stops, determinism, concurrency caps."""

import math

import pytest

from btt.errors import InvalidInput, NoSuchTrial
from btt.scheduler import Budget, ExperimentLog, Scheduler, median_stop_check, run_experiment
from btt.trace import read_trace_file

from scripted import ScriptedRunner


def run_scripted(tmp_path, policy="none", kinds=("healthy",), budget="trials:5", seed=1, **kw):
    runner = ScriptedRunner(kinds=tuple(kinds))
    return run_experiment(
        space=runner.space(),
        runner=runner,
        policy=policy,
        budget=budget,
        out_dir=tmp_path,
        concurrency=kw.pop("concurrency", 4),
        seed=seed,
        **kw,
    )


class TestBudget:
    def test_parse_grammar(self):
        assert Budget.parse("trials:5") == Budget("trials", 5)
        assert Budget.parse("wall:2000ms") == Budget("wall", 2000)
        assert Budget.parse("sim:3000") == Budget("sim", 3000)

    def test_bad_budget(self):
        with pytest.raises(InvalidInput):
            Budget.parse("epochs:3")
        with pytest.raises(InvalidInput):
            Budget.parse("trials:-1")

    def test_mode_coupling(self):
        r = ScriptedRunner()
        with pytest.raises(InvalidInput):
            Scheduler(r.space(), r, "none", Budget.parse("sim:100"), "/tmp/x", time_mode="real")


class TestTrialsBudget:
    def test_exact_count_completed(self, tmp_path):
        log = run_scripted(tmp_path, budget="trials:5")
        assert len(log.trials) == 5
        assert all(t.status == "completed" for t in log.trials)
        assert sorted(p.name for p in tmp_path.glob("*.trace.jsonl")) == [
            f"t{i:04d}.trace.jsonl" for i in range(5)
        ]
        assert (tmp_path / "experiment.jsonl").exists()

    def test_traces_parse_and_match_log(self, tmp_path):
        log = run_scripted(tmp_path, budget="trials:3")
        for t in log.trials:
            tr = read_trace_file(tmp_path / f"{t.trial_id}.trace.jsonl")
            assert tr.final.status == t.status
            assert tr.final.epochs_run == t.epochs_run


class TestDeterminism:
    def test_same_seed_identical_bytes(self, tmp_path):
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        for d in (a_dir, b_dir):
            run_scripted(d, policy="bttackler", kinds=("healthy", "vanishing", "plateau"), budget="trials:6", seed=42)
        a_files = sorted(p.name for p in a_dir.iterdir())
        b_files = sorted(p.name for p in b_dir.iterdir())
        assert a_files == b_files
        for name in a_files:
            assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes(), name


class TestBttacklerPolicy:
    def test_vanishing_trials_stopped(self, tmp_path):
        log = run_scripted(
            tmp_path, policy="bttackler", kinds=("healthy", "vanishing"), budget="trials:8", seed=3
        )
        vanishing = [t for t in log.trials if t.config.values["kind"] == "vanishing"]
        healthy = [t for t in log.trials if t.config.values["kind"] == "healthy"]
        assert vanishing and healthy
        for t in vanishing:
            assert t.status == "terminated"
            assert "ERG" in t.termination_reason
            assert t.epochs_run < 10
            assert not t.benign
        for t in healthy:
            assert t.status == "completed"

    def test_benign_termination_keeps_best_metric(self, tmp_path):
        log = run_scripted(
            tmp_path, policy="bttackler", kinds=("plateau",), budget="trials:2", seed=5
        )
        for t in log.trials:
            assert t.status == "terminated"
            assert t.termination_reason == "NMG"
            assert t.benign
            assert t.final_metric_for_sampler == t.best_val_metric

    def test_malign_termination_uses_last_metric(self, tmp_path):
        log = run_scripted(
            tmp_path, policy="bttackler", kinds=("vanishing",), budget="trials:2", seed=5
        )
        for t in log.trials:
            assert t.final_metric_for_sampler == t.last_val_metric
            assert not math.isnan(t.final_metric_for_sampler)

    def test_prefix_property_vs_none(self, tmp_path):
        none_log = run_scripted(
            tmp_path / "none", policy="none", kinds=("healthy", "vanishing", "plateau"),
            budget="trials:6", seed=9,
        )
        btt_log = run_scripted(
            tmp_path / "btt", policy="bttackler", kinds=("healthy", "vanishing", "plateau"),
            budget="trials:6", seed=9,
        )
        none_by_id = {t.trial_id: t for t in none_log.trials}
        assert {t.trial_id: t.config for t in btt_log.trials} == {
            i: t.config for i, t in none_by_id.items()
        }
        for t in btt_log.trials:
            none_trace = read_trace_file(tmp_path / "none" / f"{t.trial_id}.trace.jsonl")
            btt_trace = read_trace_file(tmp_path / "btt" / f"{t.trial_id}.trace.jsonl")
            k = len(btt_trace.epochs)
            assert btt_trace.epochs == none_trace.epochs[:k]


class TestMsrPolicy:
    def test_slow_trials_stopped_after_warmup(self, tmp_path):
        # healthy trials complete first and form the peer pool
        log = run_scripted(
            tmp_path,
            policy="msr",
            kinds=("healthy", "slow_bad"),
            budget="trials:16",
            seed=11,
            concurrency=2,
            min_peers=3,
        )
        stopped = [t for t in log.trials if t.termination_reason == "msr"]
        assert stopped
        assert all(t.config.values["kind"] == "slow_bad" for t in stopped)
        assert all(t.final_metric_for_sampler == t.last_val_metric for t in stopped)

    def test_median_stop_check_rule(self):
        assert median_stop_check(0.55, [0.6, 0.7, 0.8], "maximize", min_peers=3)
        assert not median_stop_check(0.75, [0.6, 0.7, 0.8], "maximize", min_peers=3)
        assert not median_stop_check(0.1, [0.6, 0.7], "maximize", min_peers=5)
        # ties continue (strict comparison)
        assert not median_stop_check(0.7, [0.6, 0.7, 0.8], "maximize", min_peers=3)
        assert median_stop_check(0.9, [0.6, 0.7, 0.8], "minimize", min_peers=3)


class TestRequestStop:
    def test_stop_contract_and_idempotence(self, tmp_path):
        stopped = []

        def observer(sched, ev):
            if ev.kind == "epoch_reported" and ev.payload["epoch"] == 3 and not stopped:
                trial_id = ev.payload["trial_id"]
                assert sched.request_stop(trial_id, "manual") is True
                assert sched.request_stop(trial_id, "manual-again") is False
                stopped.append(trial_id)

        runner = ScriptedRunner(kinds=("healthy",), max_epoch=20)
        log = run_experiment(
            space=runner.space(), runner=runner, policy="none", budget="trials:1",
            out_dir=tmp_path, concurrency=1, seed=2, observer=observer,
        )
        t = log.trials[0]
        assert t.status == "terminated"
        assert t.termination_reason == "manual"
        assert t.epochs_run in (3, 4)

    def test_unknown_trial(self, tmp_path):
        def observer(sched, ev):
            if ev.kind == "epoch_reported":
                with pytest.raises(NoSuchTrial):
                    sched.request_stop("nope", "x")

        runner = ScriptedRunner(kinds=("healthy",), max_epoch=3)
        run_experiment(
            space=runner.space(), runner=runner, policy="none", budget="trials:1",
            out_dir=tmp_path, concurrency=1, seed=2, observer=observer,
        )

    def test_stop_finished_trial_is_noop(self, tmp_path):
        done = []

        def observer(sched, ev):
            if ev.kind == "trial_finished" and not done:
                done.append(ev.payload["trial_id"])
                assert sched.request_stop(ev.payload["trial_id"], "late") is False

        runner = ScriptedRunner(kinds=("healthy",), max_epoch=3)
        run_experiment(
            space=runner.space(), runner=runner, policy="none", budget="trials:2",
            out_dir=tmp_path, concurrency=1, seed=2, observer=observer,
        )
        assert done


class TestConcurrencyCap:
    @pytest.mark.parametrize("concurrency", [1, 3])
    def test_running_never_exceeds_cap(self, tmp_path, concurrency):
        log = run_scripted(
            tmp_path, budget="trials:7", concurrency=concurrency, kinds=("healthy", "plateau")
        )
        running = set()
        peak = 0
        for ev in log.events:
            if ev.kind == "trial_started":
                running.add(ev.payload["trial_id"])
            elif ev.kind == "trial_finished":
                running.discard(ev.payload["trial_id"])
            peak = max(peak, len(running))
        assert peak <= concurrency
        assert len(log.trials) == 7


class TestSimBudget:
    def test_budget_exhaustion(self, tmp_path):
        # healthy trials take 10 epochs x 10ms = 100ms; budget lets ~2 waves run
        log = run_scripted(tmp_path, budget="sim:250", concurrency=2, kinds=("healthy",))
        assert any(ev.kind == "budget_exhausted" for ev in log.events)
        budget_stopped = [t for t in log.trials if t.termination_reason == "budget"]
        assert budget_stopped
        # nothing starts after the budget event
        t_budget = next(ev.ts for ev in log.events if ev.kind == "budget_exhausted")
        assert all(
            ev.ts <= t_budget for ev in log.events if ev.kind == "trial_started"
        )

    def test_more_trials_with_bttackler_same_wall(self, tmp_path):
        kinds = ("healthy", "vanishing", "vanishing")
        none_log = run_scripted(
            tmp_path / "none", policy="none", kinds=kinds, budget="sim:400", seed=7, concurrency=2
        )
        btt_log = run_scripted(
            tmp_path / "btt", policy="bttackler", kinds=kinds, budget="sim:400", seed=7, concurrency=2
        )
        assert len(btt_log.trials) > len(none_log.trials)


class TestFailures:
    def test_crash_marks_failed_and_continues(self, tmp_path):
        log = run_scripted(tmp_path, kinds=("healthy", "crash"), budget="trials:6", seed=4)
        failed = [t for t in log.trials if t.status == "failed"]
        completed = [t for t in log.trials if t.status == "completed"]
        assert failed and completed
        assert all(t.config.values["kind"] == "crash" for t in failed)
        for t in failed:
            assert math.isnan(t.final_metric_for_sampler)
            tr = read_trace_file(tmp_path / f"{t.trial_id}.trace.jsonl")
            assert tr.final.status == "failed"


class TestNonBlockingChecker:
    def test_slow_checker_delays_at_most_one_epoch(self, tmp_path):
        kinds = ("vanishing",)
        fast = run_scripted(
            tmp_path / "fast", policy="bttackler", kinds=kinds, budget="trials:2", seed=6,
            checker_latency_ms=0,
        )
        slow = run_scripted(
            tmp_path / "slow", policy="bttackler", kinds=kinds, budget="trials:2", seed=6,
            checker_latency_ms=9,  # just under the 10ms epoch cost
        )
        for ft, st in zip(fast.trials, slow.trials):
            assert st.epochs_run - ft.epochs_run in (0, 1)
        # epoch production timing is unchanged for the epochs both runs share
        fast_epochs = {
            (ev.payload["trial_id"], ev.payload["epoch"]): ev.ts
            for ev in fast.events
            if ev.kind == "epoch_reported"
        }
        for ev in slow.events:
            if ev.kind == "epoch_reported":
                key = (ev.payload["trial_id"], ev.payload["epoch"])
                if key in fast_epochs:
                    assert fast_epochs[key] == ev.ts

    def test_verdict_epoch_matches_fast_checker(self, tmp_path):
        fast = run_scripted(
            tmp_path / "f", policy="bttackler", kinds=("vanishing",), budget="trials:1", seed=6,
        )
        slow = run_scripted(
            tmp_path / "s", policy="bttackler", kinds=("vanishing",), budget="trials:1", seed=6,
            checker_latency_ms=9,
        )
        fv = [ev for ev in fast.events if ev.kind == "verdict"]
        sv = [ev for ev in slow.events if ev.kind == "verdict"]
        assert fv and sv
        assert fv[0].payload["epoch"] == sv[0].payload["epoch"]


class TestRealTimeMode:
    def test_trials_budget_real(self, tmp_path):
        log = run_scripted(
            tmp_path, budget="trials:4", time_mode="real", concurrency=2,
            kinds=("healthy", "plateau"),
        )
        assert len(log.trials) == 4
        assert all(t.status == "completed" for t in log.trials)
        for t in log.trials:
            tr = read_trace_file(tmp_path / f"{t.trial_id}.trace.jsonl")
            assert [r.epoch for r in tr.epochs] == list(range(t.epochs_run))

    def test_bttackler_stops_in_real_mode(self, tmp_path):
        runner = ScriptedRunner(kinds=("vanishing",), real_sleep_ms=8)
        log = run_experiment(
            space=runner.space(), runner=runner, policy="bttackler", budget="trials:4",
            out_dir=tmp_path, time_mode="real", concurrency=2, seed=1,
        )
        assert all(t.status == "terminated" for t in log.trials)
        assert all("ERG" in t.termination_reason for t in log.trials)
        assert all(t.epochs_run < 15 for t in log.trials)

    def test_concurrency_one_works(self, tmp_path):
        log = run_scripted(
            tmp_path, budget="trials:3", time_mode="real", concurrency=1, kinds=("healthy",)
        )
        assert len(log.trials) == 3


class TestLogPersistence:
    def test_save_load_round_trip(self, tmp_path):
        log = run_scripted(tmp_path, policy="bttackler", kinds=("healthy", "vanishing"), budget="trials:5")
        loaded = ExperimentLog.load(tmp_path)
        assert loaded.experiment_id == log.experiment_id
        assert loaded.space == log.space
        assert loaded.budget == log.budget
        assert [e.to_json() for e in loaded.events] == [e.to_json() for e in log.events]
        assert len(loaded.trials) == len(log.trials)
        for a, b in zip(loaded.trials, log.trials):
            assert a == b
