import numpy as np
import pytest
from scipy import stats

from hindsight_em.envs import FlipBitEnv, Trajectory
from hindsight_em.errors import InputError, StateError
from hindsight_em.replay import ReplayBuffer
from hindsight_em.rollout import collect, policy_act_fn
from hindsight_em.policy import ExploreCfg, make_policy


def _line_traj(L, offset=0.0, success=False):
    """1-d states offset, offset+1, ...; action t at step t; achieved goal = next state."""
    states = np.arange(L + 1, dtype=float)[:, None] + offset
    rewards = np.zeros(L, dtype=np.int64)
    if success:
        rewards[-1] = 1
    return Trajectory(states[-1] if success else np.array([-1.0]), states, np.arange(L),
                      rewards, states[1:].copy(), success)


class _LineEnv(FlipBitEnv):
    def __init__(self):
        super().__init__(1)

    def reward_fn(self, next_state, goal):
        return np.all(np.atleast_2d(next_state) == np.atleast_2d(goal), axis=-1).astype(np.int64)


class TestPush:
    def test_counts(self):
        buf = ReplayBuffer(_LineEnv(), capacity=100)
        buf.push(_line_traj(3))
        buf.push(_line_traj(4))
        assert len(buf) == 7 and buf.total_pushed == 2

    def test_fifo_eviction(self):
        buf = ReplayBuffer(_LineEnv(), capacity=10)
        for i in range(4):
            buf.push(_line_traj(4, offset=10.0 * i))
        assert len(buf) == 8
        assert buf.trajectories[0].states[0, 0] == 20.0

    def test_rejects_invalid(self):
        buf = ReplayBuffer(_LineEnv())
        bad = _line_traj(3)
        bad.rewards[0] = 1
        with pytest.raises(InputError):
            buf.push(bad)

    def test_sample_empty(self):
        with pytest.raises(StateError):
            ReplayBuffer(_LineEnv()).sample_hindsight(4, np.random.default_rng(0))

    def test_support_non_decreasing(self):
        env = FlipBitEnv(6)
        policy = make_policy(env, (8,), 0)
        buf = ReplayBuffer(env)
        rng = np.random.default_rng(0)
        prev = 0
        for tr in collect(env, policy_act_fn(policy, ExploreCfg("sample")), 30, rng):
            buf.push(tr)
            size = len(buf.relabeled_goal_support())
            assert size >= prev
            prev = size


class TestHindsightSampling:
    def test_future_strategy_law(self):
        # P(t, t') = 1 / (L (L - t)) for 0 <= t <= t' < L
        L = 5
        buf = ReplayBuffer(_LineEnv())
        buf.push(_line_traj(L))
        n = 60_000
        batch = buf.sample_hindsight(n, np.random.default_rng(0))
        t = batch.actions
        tf = batch.goals[:, 0].astype(int) - 1
        assert np.all(tf >= t)
        cells = [(i, j) for i in range(L) for j in range(i, L)]
        observed = np.array([np.sum((t == i) & (tf == j)) for i, j in cells])
        expected = np.array([n / (L * (L - i)) for i, _ in cells])
        assert observed.sum() == n
        assert stats.chisquare(observed, expected).pvalue > 1e-3

    def test_states_match_actions(self):
        buf = ReplayBuffer(_LineEnv())
        buf.push(_line_traj(6))
        batch = buf.sample_hindsight(200, np.random.default_rng(1))
        np.testing.assert_array_equal(batch.states[:, 0], batch.actions)
        assert np.all(batch.weights == 1)

    def test_original_goal_fraction(self):
        buf = ReplayBuffer(_LineEnv())
        buf.push(_line_traj(4, success=True))
        batch = buf.sample_hindsight(2000, np.random.default_rng(2), original_fraction=1.0)
        assert np.all(batch.goals[:, 0] == 4.0)

    def test_all_hindsight_count(self):
        buf = ReplayBuffer(_LineEnv())
        buf.push(_line_traj(4))
        buf.push(_line_traj(2))
        assert len(buf.all_hindsight()) == 4 * 5 // 2 + 2 * 3 // 2


class TestHerTransitions:
    def test_relabel_fraction_and_rewards(self):
        env = _LineEnv()
        buf = ReplayBuffer(env)
        buf.push(_line_traj(6))
        n = 20_000
        batch = buf.sample_her_transition(n, np.random.default_rng(0), k_her=4)
        assert abs(batch.relabeled.mean() - 0.8) < 4 * np.sqrt(0.16 / n)
        np.testing.assert_array_equal(batch.rewards, np.all(batch.next_states == batch.goals, axis=1))
        np.testing.assert_array_equal(batch.dones, batch.rewards.astype(bool))

    def test_minus_one_zero(self):
        buf = ReplayBuffer(_LineEnv())
        buf.push(_line_traj(6))
        batch = buf.sample_her_transition(500, np.random.default_rng(1), 4, "minus_one_zero")
        assert set(np.unique(batch.rewards)) <= {-1.0, 0.0}
        np.testing.assert_array_equal(batch.rewards == 0, batch.dones)

    def test_k_zero_never_relabels(self):
        buf = ReplayBuffer(_LineEnv())
        buf.push(_line_traj(6))
        batch = buf.sample_her_transition(500, np.random.default_rng(1), 0)
        assert not batch.relabeled.any()
        assert np.all(batch.goals == -1.0)
