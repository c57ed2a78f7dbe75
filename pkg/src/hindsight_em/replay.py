"""Trajectory replay buffer with future-strategy hindsight relabeling."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .envs import GoalEnv, Trajectory
from .errors import InputError, StateError


@dataclass
class HindsightBatch:
    states: np.ndarray
    actions: np.ndarray
    goals: np.ndarray  # relabeled goals
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.states)


@dataclass
class TransitionBatch:
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    goals: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    relabeled: np.ndarray

    def __len__(self) -> int:
        return len(self.states)


class ReplayBuffer:
    """FIFO store of whole trajectories, bounded by the number of transitions."""

    def __init__(self, env: GoalEnv, capacity: int = 1_000_000):
        if capacity < 1:
            raise InputError("capacity must be positive")
        self.env = env
        self.capacity = capacity
        self.trajectories: deque[Trajectory] = deque()
        self.n_transitions = 0
        self.total_pushed = 0

    def __len__(self) -> int:
        return self.n_transitions

    def push(self, traj: Trajectory) -> None:
        traj.validate()
        if len(traj) > self.capacity:
            raise InputError("trajectory longer than the buffer capacity")
        self.trajectories.append(traj)
        self.n_transitions += len(traj)
        self.total_pushed += 1
        while self.n_transitions > self.capacity:
            old = self.trajectories.popleft()
            self.n_transitions -= len(old)

    def _pick(self, rng: np.random.Generator, n: int):
        """Trajectory index, step t ~ U[0, L-1], and t' ~ U[t, L-1] per sample."""
        if not self.trajectories:
            raise StateError("cannot sample from an empty buffer")
        idx = rng.integers(len(self.trajectories), size=n)
        lengths = np.array([len(self.trajectories[i]) for i in idx])
        t = np.floor(rng.random(n) * lengths).astype(np.int64)
        t_future = t + np.floor(rng.random(n) * (lengths - t)).astype(np.int64)
        return idx, t, t_future

    def sample_hindsight(
        self, batch_size: int, rng: np.random.Generator, original_fraction: float = 0.0
    ) -> HindsightBatch:
        """Future-strategy samples (s_t, a_t, phi(s_{t'+1})).

        With ``original_fraction`` > 0, that share of samples drawn from
        successful episodes keep the original goal instead of a relabeled one.
        """
        idx, t, tf = self._pick(rng, batch_size)
        trajs = [self.trajectories[i] for i in idx]
        if original_fraction > 0:
            keep = rng.random(batch_size) < original_fraction
            for n, tr in enumerate(trajs):
                if keep[n] and tr.success:
                    tf[n] = len(tr) - 1
        states = np.stack([tr.states[j] for tr, j in zip(trajs, t)])
        actions = np.stack([tr.actions[j] for tr, j in zip(trajs, t)])
        goals = np.stack([tr.achieved[j] for tr, j in zip(trajs, tf)])
        return HindsightBatch(states, actions, goals, np.ones(batch_size))

    def sample_her_transition(
        self, batch_size: int, rng: np.random.Generator, k_her: int = 4,
        reward_mode: str = "zero_one",
    ) -> TransitionBatch:
        idx, t, tf = self._pick(rng, batch_size)
        relabel = rng.random(batch_size) < k_her / (k_her + 1.0)
        trajs = [self.trajectories[i] for i in idx]
        states = np.stack([tr.states[j] for tr, j in zip(trajs, t)])
        actions = np.stack([tr.actions[j] for tr, j in zip(trajs, t)])
        nexts = np.stack([tr.states[j + 1] for tr, j in zip(trajs, t)])
        goals = np.stack([
            tr.achieved[f] if r else tr.goal for tr, f, r in zip(trajs, tf, relabel)
        ])
        success = np.asarray(self.env.reward_fn(nexts, goals), dtype=np.float64)
        rewards = success - 1.0 if reward_mode == "minus_one_zero" else success
        return TransitionBatch(states, actions, nexts, goals, rewards, success.astype(bool), relabel)

    def relabeled_goal_support(self) -> set[tuple]:
        """Every goal the future strategy can produce from the stored data."""
        return {tuple(g) for tr in self.trajectories for g in tr.achieved}

    def all_hindsight(self) -> HindsightBatch:
        """Every eligible (s_t, a_t, phi(s_{t'+1})) with t <= t', unweighted."""
        if not self.trajectories:
            raise StateError("buffer is empty")
        s, a, g = [], [], []
        for tr in self.trajectories:
            for j in range(len(tr)):
                for f in range(j, len(tr)):
                    s.append(tr.states[j])
                    a.append(tr.actions[j])
                    g.append(tr.achieved[f])
        return HindsightBatch(np.stack(s), np.stack(a), np.stack(g), np.ones(len(s)))
