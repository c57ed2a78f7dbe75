import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hindsight_em.envs import FourRoomEnv, FlipBitEnv, NavigationEnv, OneStepEnv, Trajectory, make_env
from hindsight_em.errors import ConfigError, InputError


class TestFlipBit:
    def test_flip_toggles_one_bit(self):
        env = FlipBitEnv(4)
        res = env.step(np.array([0, 1, 0, 0.0]), np.array([1, 1, 0, 0.0]), 0)
        assert np.array_equal(res.next_state, [1, 1, 0, 0])
        assert res.reward == 1 and res.done

    def test_no_reward_elsewhere(self):
        env = FlipBitEnv(3)
        res = env.step(np.zeros(3), np.ones(3), 1)
        assert res.reward == 0 and not res.done

    @given(st.integers(1, 40), st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_reset_state_differs_from_goal(self, k, seed):
        env = FlipBitEnv(k)
        s, g = env.reset(np.random.default_rng(seed))
        assert s.shape == g.shape == (k,)
        assert set(np.unique(np.concatenate([s, g]))) <= {0.0, 1.0}
        assert not np.array_equal(s, g)

    def test_horizon_defaults_to_k(self):
        assert FlipBitEnv(7).spec.horizon == 7

    def test_k1_has_noop_action(self):
        env = FlipBitEnv(1)
        assert env.spec.n_actions == 2
        assert np.array_equal(env.transition(np.array([[0.0]]), np.array([1])), [[0.0]])
        assert np.array_equal(env.transition(np.array([[0.0]]), np.array([0])), [[1.0]])

    def test_rejects_bad_action(self):
        env = FlipBitEnv(3)
        with pytest.raises(InputError):
            env.step(np.zeros(3), np.ones(3), 3)

    def test_rejects_k0(self):
        with pytest.raises(ConfigError):
            FlipBitEnv(0)


class TestNavigation:
    def test_action_and_state_clipping(self):
        env = NavigationEnv(2)
        res = env.step(np.array([0.95, 0.0]), np.array([0.0, 0.5]), np.array([0.5, 0.0]))
        np.testing.assert_allclose(res.next_state, [1.0, 0.0])

    def test_success_ball(self):
        env = NavigationEnv(2)
        assert env.reward_fn(np.array([0.5, 0.5]), np.array([0.55, 0.5])) == 1
        assert env.reward_fn(np.array([0.5, 0.5]), np.array([0.5, 0.62])) == 0

    @given(st.integers(1, 12), st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_reset(self, k, seed):
        env = NavigationEnv(k)
        s, g = env.reset(np.random.default_rng(seed))
        assert np.array_equal(s, np.zeros(k))
        assert np.all(np.abs(g) <= 1) and np.linalg.norm(g) >= env.tol

    def test_reward_batch(self):
        env = NavigationEnv(2)
        r = env.reward_fn(np.zeros((3, 2)), np.array([[0, 0], [0.2, 0], [0.05, 0.05]]))
        assert r.tolist() == [1, 0, 1]


class TestFourRoom:
    def test_layout(self):
        env = FourRoomEnv()
        assert env.walls.shape == (13, 13)
        assert len(env.free_cells) == 104

    def test_achieved_goal_is_cell(self):
        env = FourRoomEnv()
        assert np.array_equal(env.achieved_goal(np.array([3.0, 7.0])), [3.0, 7.0])

    def test_wall_blocks(self):
        env = FourRoomEnv()
        # (1, 1) is a corner: up and left hit walls
        for a in (0, 2):
            assert np.array_equal(env.step(np.array([1.0, 1.0]), np.array([5.0, 5.0]), a).next_state, [1, 1])
        assert np.array_equal(env.step(np.array([1.0, 1.0]), np.array([5.0, 5.0]), 1).next_state, [2, 1])
        assert np.array_equal(env.step(np.array([1.0, 1.0]), np.array([5.0, 5.0]), 3).next_state, [1, 2])

    def test_doorway(self):
        env = FourRoomEnv()
        # (3, 6) is the doorway between the two top rooms
        assert np.array_equal(env.step(np.array([3.0, 5.0]), np.array([9.0, 9.0]), 3).next_state, [3, 6])

    def test_disconnected_layout_rejected(self):
        layout = ("#####", "# # #", "#####")
        with pytest.raises(ConfigError):
            FourRoomEnv(layout)

    def test_reset_distinct_free_cells(self):
        env = FourRoomEnv()
        rng = np.random.default_rng(0)
        for _ in range(200):
            s, g = env.reset(rng)
            assert not np.array_equal(s, g)
            assert not env.walls[int(s[0]), int(s[1])] and not env.walls[int(g[0]), int(g[1])]

    def test_never_leaves_free_cells(self):
        env = FourRoomEnv()
        rng = np.random.default_rng(1)
        s = env.free_cells.copy()
        for _ in range(30):
            s = env.transition(s, rng.integers(4, size=len(s)))
            assert not env.walls[s[:, 0].astype(int), s[:, 1].astype(int)].any()


class TestOneStep:
    def test_reward_iff_action_equals_goal(self):
        env = OneStepEnv(4)
        for b in range(4):
            for g in range(4):
                assert env.step(np.array([-1.0]), np.array([float(g)]), b).reward == int(b == g)

    def test_k_below_two(self):
        with pytest.raises(InputError):
            OneStepEnv(1)


class TestTrajectoryValidation:
    def _traj(self, rewards, success):
        n = len(rewards)
        return Trajectory(np.zeros(1), np.zeros((n + 1, 1)), np.zeros(n, dtype=int),
                          np.array(rewards), np.zeros((n, 1)), success)

    def test_valid(self):
        self._traj([0, 0, 1], True).validate()

    @pytest.mark.parametrize("rewards,success", [([1, 0], False), ([0, 1], False), ([0, 2], True), ([], False)])
    def test_invalid(self, rewards, success):
        with pytest.raises(InputError):
            self._traj(rewards, success).validate()


def test_make_env_unknown():
    with pytest.raises(ConfigError):
        make_env("maze")
