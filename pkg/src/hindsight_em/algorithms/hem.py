"""Hindsight expectation maximization.

Each iteration collects N exploratory episodes into the replay buffer, then
alternates a partial E-step (a batch of future-relabeled samples) with a
partial M-step (one Adam ascent step on their mean log-likelihood).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..envs import GoalEnv
from ..policy import ExploreCfg
from ..replay import HindsightBatch, ReplayBuffer
from ..rollout import collect_parallel, evaluate, policy_act_fn
from .common import MetricRow, PolicyOptimizer, Stopwatch


@dataclass
class HemConfig:
    n_trajectories: int = 64
    gradient_steps: int = 40
    batch_size: int = 64
    lr: float = 1e-3
    explore: ExploreCfg = field(default_factory=lambda: ExploreCfg("epsilon_uniform", epsilon=0.3))
    eval_episodes: int = 100
    original_fraction: float = 0.0

    def __post_init__(self) -> None:
        for name in ("n_trajectories", "gradient_steps", "batch_size", "eval_episodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


def m_step_objective(policy, batch: HindsightBatch) -> float:
    """Mean log-likelihood of the relabeled actions under the policy."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    return float(np.mean(policy.log_prob(batch.states, batch.goals, batch.actions)))


def m_step_gradient(policy, batch: HindsightBatch) -> list[np.ndarray]:
    grads = policy.log_prob_grad(batch.states, batch.goals, batch.actions, batch.weights)
    return [g / len(batch) for g in grads]


class HemTrainer:
    def __init__(self, policy, env: GoalEnv, cfg: HemConfig, capacity: int = 1_000_000):
        self.policy = policy
        self.env = env
        self.cfg = cfg
        self.buffer = ReplayBuffer(env, capacity)
        self.opt = PolicyOptimizer(policy, cfg.lr)
        self.env_steps = 0
        self.iteration = 0
        self.clock = Stopwatch()

    def collect(self, rngs: list[np.random.Generator]) -> None:
        act_fn = policy_act_fn(self.policy, self.cfg.explore)
        for tr in collect_parallel(self.env, act_fn, self.cfg.n_trajectories, rngs):
            self.buffer.push(tr)
            self.env_steps += len(tr)

    def train(self, rng: np.random.Generator) -> float:
        obj = float("nan")
        for _ in range(self.cfg.gradient_steps):
            batch = self.buffer.sample_hindsight(self.cfg.batch_size, rng, self.cfg.original_fraction)
            obj = m_step_objective(self.policy, batch)
            self.policy = self.opt.ascend(self.policy, m_step_gradient(self.policy, batch))
        return obj

    def step(self, collect_rngs, train_rng, eval_rng) -> MetricRow:
        self.collect(collect_rngs)
        obj = self.train(train_rng)
        success = evaluate(self.policy, self.env, self.cfg.eval_episodes, eval_rng)
        row = MetricRow(self.iteration, self.env_steps, success, obj, len(self.buffer), self.clock())
        self.iteration += 1
        return row


def hem_iteration(trainer: HemTrainer, rng: np.random.Generator) -> MetricRow:
    """One collect/E-step/M-step/evaluate round drawing every stream from ``rng``."""
    seeds = rng.spawn(3)
    return trainer.step([seeds[0]], seeds[1], seeds[2])
