import math

import numpy as np
import pytest

from hindsight_em.algorithms import (
    DqnConfig,
    DqnHerTrainer,
    HemConfig,
    HemTrainer,
    QNetwork,
    hem_iteration,
    hpg_update,
    m_step_gradient,
    m_step_objective,
    reinforce_update,
)
from hindsight_em.algorithms.common import MetricRow, PolicyOptimizer
from hindsight_em.algorithms.policy_gradient import RATIO_CLIP, HpgDiagnostics
from hindsight_em.envs import FlipBitEnv, OneStepEnv, Trajectory
from hindsight_em.errors import ConfigError, StateError
from hindsight_em.policy import ExploreCfg, TabularPolicy, make_policy
from hindsight_em.replay import HindsightBatch, ReplayBuffer, TransitionBatch
from hindsight_em.rollout import collect, policy_act_fn


def _onestep_traj(b, g):
    r = int(b == g)
    return Trajectory(np.array([float(g)]), np.array([[-1.0], [float(b)]]), np.array([b]),
                      np.array([r]), np.array([[float(b)]]), bool(r))


def _batch(actions, goals):
    n = len(actions)
    return HindsightBatch(np.zeros((n, 1)), np.asarray(actions), np.asarray(goals, float).reshape(n, 1), np.ones(n))


class TestMStep:
    def test_uniform_objective(self):
        batch = _batch([0, 3, 2], [1, 1, 0])
        assert m_step_objective(TabularPolicy.uniform(4), batch) == pytest.approx(-1.3862944, abs=1e-7)

    def test_deterministic_fit_near_zero(self):
        table = np.zeros((3, 3))
        table[2, 1] = 40.0
        assert m_step_objective(TabularPolicy(table), _batch([2], [1])) == pytest.approx(0.0, abs=1e-12)

    def test_full_batch_ascent_strictly_increases(self):
        rng = np.random.default_rng(0)
        batch = _batch(rng.integers(4, size=30), rng.integers(4, size=30))
        policy = TabularPolicy.uniform(4)
        opt = PolicyOptimizer(policy, lr=0.05)
        values = []
        for _ in range(50):
            values.append(m_step_objective(policy, batch))
            policy = opt.ascend(policy, m_step_gradient(policy, batch))
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            m_step_objective(TabularPolicy.uniform(2), _batch([], []))


class TestHem:
    def test_k1_solves_within_50_iterations(self):
        env = FlipBitEnv(1)
        trainer = HemTrainer(make_policy(env, (16,), 0), env, HemConfig(n_trajectories=8, gradient_steps=10,
                                                                        batch_size=16, lr=1e-2))
        rng = np.random.default_rng(0)
        rates = [hem_iteration(trainer, rng).success_rate for _ in range(50)]
        assert max(rates) == 1.0

    def test_one_iteration_buffer_growth(self):
        env = FlipBitEnv(3)
        trainer = HemTrainer(make_policy(env, (8,), 0), env, HemConfig(n_trajectories=5, batch_size=4))
        row = hem_iteration(trainer, np.random.default_rng(0))
        assert 5 <= len(trainer.buffer) <= 5 * env.spec.horizon
        assert row.env_steps == len(trainer.buffer) == row.buffer_size

    def test_seeded_rows_identical(self):
        def run():
            env = FlipBitEnv(4)
            trainer = HemTrainer(make_policy(env, (8,), 3), env, HemConfig(n_trajectories=6, gradient_steps=3,
                                                                           batch_size=8, eval_episodes=10))
            rng = np.random.default_rng(11)
            return [hem_iteration(trainer, rng).as_csv()[:5] for _ in range(4)]
        assert run() == run()

    def test_bad_config(self):
        with pytest.raises(ValueError):
            HemConfig(n_trajectories=0)


class TestReinforce:
    def test_zero_returns_zero_gradient(self):
        policy = TabularPolicy.uniform(3)
        grads = reinforce_update(policy, [_onestep_traj(0, 1), _onestep_traj(2, 1)])
        assert all(np.all(g == 0) for g in grads)

    def test_single_sample_closed_form(self):
        # eta[a, g] = delta(b, g') delta(g, g') (delta(a, b) - pi(a | g))
        rng = np.random.default_rng(0)
        policy = TabularPolicy(rng.normal(size=(4, 4)))
        b = gp = 2
        eta = reinforce_update(policy, [_onestep_traj(b, gp)])[0]
        pi = policy.probs(None, np.array([float(gp)]))[0]
        expected = np.zeros((4, 4))
        expected[:, gp] = (np.arange(4) == b) - pi
        np.testing.assert_allclose(eta, expected, atol=1e-15)

    def test_mean_baseline(self):
        policy = TabularPolicy.uniform(2)
        trajs = [_onestep_traj(0, 0), _onestep_traj(1, 0)]
        grads = reinforce_update(policy, trajs, "mean")[0]
        # returns 1 and 0, baseline 0.5: (0.5 * (e0 - 0.5) - 0.5 * (e1 - 0.5)) / 2
        np.testing.assert_allclose(grads[:, 0], [0.25, -0.25])

    def test_rejects_unknown_baseline(self):
        with pytest.raises(ValueError):
            reinforce_update(TabularPolicy.uniform(2), [_onestep_traj(0, 0)], "median")


class TestHpg:
    def test_original_goal_equals_reinforce(self):
        env = FlipBitEnv(4)
        policy = make_policy(env, (8,), 0)
        trajs = collect(env, policy_act_fn(policy, ExploreCfg("sample")), 6, np.random.default_rng(0))
        a = hpg_update(policy, [(t, t.goal) for t in trajs], env.reward_fn)
        b = reinforce_update(policy, trajs)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, atol=1e-14)

    def test_ratio_weighting_one_step(self):
        policy = TabularPolicy(np.random.default_rng(1).normal(size=(3, 3)))
        tr = _onestep_traj(2, 0)
        grads = hpg_update(policy, [(tr, np.array([2.0]))], OneStepEnv(3).reward_fn)[0]
        p_new = policy.probs(None, np.array([2.0]))[0]
        p_old = policy.probs(None, np.array([0.0]))[0]
        ratio = min(p_new[2] / p_old[2], RATIO_CLIP)
        expected = np.zeros((3, 3))
        expected[:, 2] = ratio * ((np.arange(3) == 2) - p_new)
        np.testing.assert_allclose(grads, expected, atol=1e-14)

    def test_clipping_counted(self):
        table = np.zeros((2, 2))
        table[1, 0] = -10.0  # action 1 is very unlikely under goal 0
        diag = HpgDiagnostics()
        hpg_update(TabularPolicy(table), [(_onestep_traj(1, 0), np.array([1.0]))], OneStepEnv(2).reward_fn, diag)
        assert diag.clipped == 1 and diag.pairs == 1

    def test_truncates_at_first_success(self):
        env = FlipBitEnv(3)
        policy = make_policy(env, (4,), 0)
        states = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1.0]])
        tr = Trajectory(np.array([0, 0, 1.0]), states, np.array([0, 1, 2]), np.zeros(3, dtype=int),
                        states[1:].copy(), False)
        full = hpg_update(policy, [(tr, states[1])], env.reward_fn)
        short = Trajectory(tr.goal, states[:2], tr.actions[:1], np.zeros(1, dtype=int), states[1:2], False)
        head = hpg_update(policy, [(short, states[1])], env.reward_fn)
        for x, y in zip(full, head):
            np.testing.assert_allclose(x, y, atol=1e-14)


class TestDqn:
    def _qnet(self, **kw):
        return QNetwork.for_env(FlipBitEnv(3), (8,), 0, **kw)

    def test_target_ranges(self):
        assert self._qnet().target_range == (0.0, 1.0)
        lo, hi = self._qnet(reward_mode="minus_one_zero", gamma=0.9).target_range
        assert lo == pytest.approx(-10.0) and hi == 0.0

    def test_td_targets(self):
        q = self._qnet(gamma=0.5)
        batch = TransitionBatch(np.zeros((2, 3)), np.array([0, 1]), np.ones((2, 3)), np.ones((2, 3)),
                                np.array([1.0, 0.0]), np.array([True, False]), np.array([True, True]))
        boot = q.q_values(batch.next_states, batch.goals, target=True).max(axis=1)
        expected = np.clip(np.array([1.0, 0.5 * boot[1]]), 0, 1)
        np.testing.assert_allclose(q.td_targets(batch), expected)

    def test_target_sync(self):
        q = self._qnet(sync_interval=3)
        batch = TransitionBatch(np.zeros((4, 3)), np.zeros(4, dtype=int), np.ones((4, 3)), np.ones((4, 3)),
                                np.ones(4), np.ones(4, dtype=bool), np.zeros(4, dtype=bool))
        before = q.target_net.flat()
        for i in range(3):
            q.update(batch)
            if i < 2:
                np.testing.assert_array_equal(q.target_net.flat(), before)
        np.testing.assert_array_equal(q.target_net.flat(), q.net.flat())

    def test_update_reduces_loss_on_fixed_targets(self):
        q = self._qnet()
        rng = np.random.default_rng(0)
        batch = TransitionBatch(rng.integers(0, 2, (16, 3)).astype(float), rng.integers(3, size=16),
                                np.zeros((16, 3)), rng.integers(0, 2, (16, 3)).astype(float),
                                np.zeros(16), np.zeros(16, dtype=bool), np.zeros(16, dtype=bool))
        targets = rng.uniform(0, 1, 16)
        first = q.update(batch, targets)
        for _ in range(200):
            last = q.update(batch, targets)
        assert last < first

    def test_validation(self):
        with pytest.raises(ConfigError):
            self._qnet(gamma=1.0)
        with pytest.raises(ConfigError):
            self._qnet(reward_mode="plus_one")

    def test_empty_buffer(self):
        from hindsight_em.algorithms import dqn_her_update
        with pytest.raises(StateError):
            dqn_her_update(self._qnet(), ReplayBuffer(FlipBitEnv(3)), 4, np.random.default_rng(0))

    def test_trainer_row(self):
        env = FlipBitEnv(3)
        trainer = DqnHerTrainer(QNetwork.for_env(env, (8,), 0), env,
                                DqnConfig(n_trajectories=4, gradient_steps=2, batch_size=8, eval_episodes=5))
        row = trainer.step([np.random.default_rng(0)], np.random.default_rng(1), np.random.default_rng(2))
        assert isinstance(row, MetricRow)
        assert 0.0 <= row.success_rate <= 1.0 and math.isfinite(row.m_step_objective)
