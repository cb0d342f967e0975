"""Alternating training loop: schedule gating, clipping, determinism, resume."""

import shutil

import numpy as np
import pytest

from dotn import (
    AdamState,
    BatchPair,
    ConfigError,
    DataError,
    JointCostParams,
    Network,
    StateError,
    TrainLog,
    TrainRecord,
    TrainSchedule,
    train,
    train_source_only,
    train_step,
)


def tiny_problem(seed=0, rows=64, d_in=6, d_out=3):
    rng = np.random.default_rng(seed)
    xs = rng.standard_normal((rows, d_in))
    w = rng.standard_normal((d_in, d_out))
    ys = xs @ w + 0.1 * rng.standard_normal((rows, d_out))
    xt = rng.standard_normal((rows, d_in)) + 0.5
    return xs, ys, xt


def fresh_nets(seed, d_in=6, d_out=3):
    f = Network.create([d_in, 8, d_out], ["relu", "linear"], np.random.default_rng([seed, 0]))
    h = Network.create([d_out, 4, 1], ["tanh", "linear"], np.random.default_rng([seed, 1]))
    return f, h


def snapshot(net):
    return [p.copy() for p in net.parameters()]


def identical(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def step_loop(f, h, sched, iters, seed=0):
    xs, ys, xt = tiny_problem(seed)
    cp = JointCostParams(1.0 / xs.shape[1], 1.0 / ys.shape[1])
    f_opt = AdamState(f, sched.f_learning_rate, sched.f_beta1, sched.f_beta2)
    h_opt = AdamState(h, sched.h_learning_rate, sched.h_beta1, sched.h_beta2)
    rng = np.random.default_rng(0)
    records, h_snaps = [], []
    for it in range(1, iters + 1):
        idx = rng.permutation(xs.shape[0])[: sched.batch_size]
        bp = BatchPair(xs[idx], ys[idx], xt[idx])
        records.append(train_step(f, h, bp, sched, it, f_opt, h_opt, cp))
        h_snaps.append(snapshot(h))
    return records, h_snaps


class TestScheduleGating:
    def test_critic_clipped_exactly_after_every_update(self):
        f, h = fresh_nets(1)
        sched = TrainSchedule(batch_size=8, n_h=1, total_iterations=6, clip=0.01,
                              h_learning_rate=1e-2)
        _, h_snaps = step_loop(f, h, sched, 6)
        for snap in h_snaps:
            assert max(np.abs(p).max() for p in snap) <= 0.01

    def test_critic_untouched_between_scheduled_updates(self):
        f, h = fresh_nets(2)
        sched = TrainSchedule(batch_size=8, n_h=3, total_iterations=7, h_learning_rate=1e-2)
        before = snapshot(h)
        _, h_snaps = step_loop(f, h, sched, 7)
        # iterations 1, 2 leave h bit-identical; 3 fires
        assert identical(h_snaps[0], before)
        assert identical(h_snaps[1], before)
        assert not identical(h_snaps[2], before)
        # 4, 5 frozen again at the post-update parameters
        assert identical(h_snaps[3], h_snaps[2])
        assert identical(h_snaps[4], h_snaps[2])

    def test_never_periods_disable_updates_but_losses_still_logged(self):
        f, h = fresh_nets(3)
        h_before = snapshot(h)
        sched = TrainSchedule(batch_size=8, n_s=None, n_f=None, n_h=None, total_iterations=4)
        records, h_snaps = step_loop(f, h, sched, 4)
        assert identical(h_snaps[-1], h_before)
        for r in records:
            for field in ("l1", "l2", "lh", "lf", "gamma_violation"):
                assert getattr(r, field) is not None
                assert np.isfinite(getattr(r, field))

    def test_zero_learning_rate_freezes_f(self):
        f, h = fresh_nets(4)
        f_before = snapshot(f)
        sched = TrainSchedule(batch_size=8, f_learning_rate=0.0, total_iterations=5)
        step_loop(f, h, sched, 5)
        assert identical(snapshot(f), f_before)

    def test_period_validation(self):
        with pytest.raises(ConfigError):
            TrainSchedule(n_s=0)
        with pytest.raises(ConfigError):
            TrainSchedule(n_f=-2)
        with pytest.raises(ConfigError):
            TrainSchedule(batch_size=0)
        with pytest.raises(ConfigError):
            TrainSchedule(clip=0.0)
        with pytest.raises(ConfigError):
            TrainSchedule(ot_solver="lp")
        # None means "never" and is valid for every period
        TrainSchedule(n_s=None, n_f=None, n_h=None)

    def test_iteration_must_be_positive(self):
        f, h = fresh_nets(5)
        xs, ys, xt = tiny_problem()
        sched = TrainSchedule(batch_size=4)
        bp = BatchPair(xs[:4], ys[:4], xt[:4])
        cp = JointCostParams(1.0, 1.0)
        with pytest.raises(ValueError):
            train_step(f, h, bp, sched, 0, AdamState(f), AdamState(h), cp)


class TestDeterminism:
    def test_same_seed_reproduces_losses(self):
        xs, ys, xt = tiny_problem()
        logs = []
        for _ in range(2):
            f, h = fresh_nets(7)
            sched = TrainSchedule(batch_size=8, total_iterations=12, seed=42)
            _, log = train(f, h, (xs, ys), xt, sched)
            logs.append(log)
        for a, b in zip(logs[0].records, logs[1].records):
            for field in ("l1", "l2", "lh", "lf", "gamma_violation"):
                assert abs(getattr(a, field) - getattr(b, field)) <= 1e-12

    def test_different_seed_changes_batches(self):
        xs, ys, xt = tiny_problem()
        finals = []
        for seed in (1, 2):
            f, h = fresh_nets(8)
            sched = TrainSchedule(batch_size=8, total_iterations=6, seed=seed,
                                  f_learning_rate=1e-3)
            f, _ = train(f, h, (xs, ys), xt, sched)
            finals.append(snapshot(f))
        assert not identical(finals[0], finals[1])

    def test_sinkhorn_solver_path(self):
        xs, ys, xt = tiny_problem()
        f, h = fresh_nets(9)
        sched = TrainSchedule(batch_size=8, total_iterations=3, ot_solver="sinkhorn",
                              sinkhorn_epsilon=0.1)
        _, log = train(f, h, (xs, ys), xt, sched)
        for r in log.records:
            assert r.gamma_violation <= 1e-6


class TestTrainApi:
    def test_batch_larger_than_dataset_rejected(self):
        xs, ys, xt = tiny_problem(rows=8)
        f, h = fresh_nets(10)
        with pytest.raises(DataError):
            train(f, h, (xs, ys), xt, TrainSchedule(batch_size=32, total_iterations=1))

    def test_dimension_mismatch_rejected(self):
        xs, ys, xt = tiny_problem()
        f, h = fresh_nets(11, d_in=5)  # wrong input width
        with pytest.raises(Exception):
            train(f, h, (xs, ys), xt, TrainSchedule(batch_size=8, total_iterations=1))

    def test_eval_hook_called_on_cadence(self):
        xs, ys, xt = tiny_problem()
        f, h = fresh_nets(12)
        seen = []

        def hook(net, iteration):
            seen.append(iteration)
            return {"probe": float(iteration)}

        sched = TrainSchedule(batch_size=8, total_iterations=9)
        _, log = train(f, h, (xs, ys), xt, sched, eval_fn=hook, eval_every=4)
        assert seen == [4, 8]
        assert [e["iteration"] for e in log.evals] == [4, 8]

    def test_source_only_records_l1_descent(self):
        xs, ys, _ = tiny_problem()
        f, _ = fresh_nets(13)
        sched = TrainSchedule(batch_size=16, total_iterations=60, f_learning_rate=1e-2)
        f, log = train_source_only(f, (xs, ys), sched)
        assert len(log.records) == 60
        assert log.records[-1].l1 < log.records[0].l1
        assert log.records[0].l2 is None


class TestLogAndCheckpoint:
    def test_log_round_trips_through_jsonl(self, tmp_path):
        log = TrainLog()
        log.append(TrainRecord(iteration=1, l1=0.5, l2=1.25, lh=-0.1, lf=0.2,
                               gamma_violation=1e-9, wall_ms=3.5))
        log.append(TrainRecord(iteration=2, l1=0.25, wall_ms=1.0))
        log.evals.append({"iteration": 2, "mse": 0.125})
        path = tmp_path / "log.jsonl"
        log.write_jsonl(path)
        back = TrainLog.read_jsonl(path)
        assert back.records == log.records
        assert back.evals == log.evals

    def test_log_rejects_nonincreasing_iterations(self):
        log = TrainLog()
        log.append(TrainRecord(iteration=3))
        with pytest.raises(StateError):
            log.append(TrainRecord(iteration=3))

    def test_resume_matches_uninterrupted_run(self, tmp_path):
        xs, ys, xt = tiny_problem()
        sched = TrainSchedule(batch_size=8, total_iterations=10, f_learning_rate=1e-3,
                              h_learning_rate=1e-3)

        f1, h1 = fresh_nets(20)
        f1, log1 = train(f1, h1, (xs, ys), xt, sched)

        # same run but checkpointing every 4 iterations; snapshot the
        # iteration-4 file from inside the eval hook at iteration 8
        ckpt = tmp_path / "run.npz"
        frozen = tmp_path / "at4.npz"

        def grab(net, iteration):
            if iteration == 8:
                shutil.copy(ckpt, frozen)
            return {}

        f2, h2 = fresh_nets(20)
        f2, log2 = train(f2, h2, (xs, ys), xt, sched, eval_fn=grab, eval_every=8,
                         checkpoint_path=ckpt, checkpoint_every=4)
        assert identical(snapshot(f1), snapshot(f2))

        # resume from the frozen mid-run state and finish the schedule
        shutil.copy(frozen, ckpt)
        f3, h3 = fresh_nets(20)
        f3, log3 = train(f3, h3, (xs, ys), xt, sched, checkpoint_path=ckpt, resume=True)
        assert identical(snapshot(f3), snapshot(f1))
        assert identical(snapshot(h3), snapshot(h1))
        assert len(log3.records) == 10
        for a, b in zip(log1.records, log3.records):
            assert a.iteration == b.iteration
            assert abs(a.l2 - b.l2) <= 1e-12

    def test_resume_rejects_other_schedule(self, tmp_path):
        xs, ys, xt = tiny_problem()
        ckpt = tmp_path / "run.npz"
        f, h = fresh_nets(21)
        sched = TrainSchedule(batch_size=8, total_iterations=4)
        train(f, h, (xs, ys), xt, sched, checkpoint_path=ckpt, checkpoint_every=2)
        other = TrainSchedule(batch_size=8, total_iterations=6)
        f2, h2 = fresh_nets(21)
        with pytest.raises(StateError):
            train(f2, h2, (xs, ys), xt, other, checkpoint_path=ckpt, resume=True)

    def test_resume_with_missing_file_starts_fresh(self, tmp_path):
        xs, ys, xt = tiny_problem()
        f, h = fresh_nets(22)
        sched = TrainSchedule(batch_size=8, total_iterations=3)
        _, log = train(f, h, (xs, ys), xt, sched,
                       checkpoint_path=tmp_path / "none.npz", resume=True)
        assert len(log.records) == 3
