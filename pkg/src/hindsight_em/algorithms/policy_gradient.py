"""On-policy REINFORCE and hindsight policy gradient (HPG) baselines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..envs import GoalEnv, Trajectory
from ..policy import ExploreCfg
from ..rollout import collect_parallel, evaluate, policy_act_fn
from .common import MetricRow, PolicyOptimizer, Stopwatch

RATIO_CLIP = 10.0


def _scaled(grads, n):
    return [g / n for g in grads]


def reinforce_update(policy, trajectories: list[Trajectory], baseline: str = "off") -> list[np.ndarray]:
    """Mean over episodes of sum_t (G_t - b) grad log pi(a_t | s_t, g).

    G_t is the reward-to-go; with ``baseline="mean"`` b is the batch-mean
    episode return, otherwise 0.
    """
    if baseline not in ("off", "mean"):
        raise ValueError(f"unknown baseline {baseline!r}")
    b = float(np.mean([tr.rewards.sum() for tr in trajectories])) if baseline == "mean" else 0.0
    states, goals, actions, weights = [], [], [], []
    for tr in trajectories:
        to_go = np.cumsum(tr.rewards[::-1])[::-1].astype(np.float64)
        states.append(tr.states[:-1])
        goals.append(np.repeat(tr.goal[None], len(tr), axis=0))
        actions.append(tr.actions)
        weights.append(to_go - b)
    grads = policy.log_prob_grad(
        np.concatenate(states), np.concatenate(goals), np.concatenate(actions), np.concatenate(weights)
    )
    return _scaled(grads, len(trajectories))


@dataclass
class HpgDiagnostics:
    pairs: int = 0
    skipped: int = 0
    clipped: int = 0


def hpg_update(
    policy, pairs: list[tuple[Trajectory, np.ndarray]], reward_fn, diagnostics: HpgDiagnostics | None = None
) -> list[np.ndarray]:
    """Per-decision importance-weighted gradient for relabeled (episode, goal) pairs.

    For goal g' the episode is truncated at its first success under g'. Step t's
    score grad log pi(a_t | s_t, g') is weighted by the reward-to-go under g'
    times prod_{u <= t} pi(a_u | s_u, g') / pi(a_u | s_u, g), the product
    clipped to [0, RATIO_CLIP].
    """
    diag = diagnostics if diagnostics is not None else HpgDiagnostics()
    states, goals, actions, weights = [], [], [], []
    used = 0
    for tr, g_new in pairs:
        diag.pairs += 1
        g_new = np.asarray(g_new, dtype=np.float64)
        r = np.asarray(reward_fn(tr.states[1:], np.repeat(g_new[None], len(tr), axis=0)), dtype=np.float64)
        hits = np.flatnonzero(r)
        L = hits[0] + 1 if len(hits) else len(tr)
        r = r[:L]
        s, a = tr.states[:L], tr.actions[:L]
        g_rep = np.repeat(g_new[None], L, axis=0)
        if np.array_equal(g_new, tr.goal):
            ratio = np.ones(L)
        else:
            lp_new = policy.log_prob(s, g_rep, a)
            lp_old = policy.log_prob(s, np.repeat(tr.goal[None], L, axis=0), a)
            if np.any(np.isneginf(lp_old)):
                diag.skipped += 1
                continue
            ratio = np.exp(np.cumsum(lp_new - lp_old))
            diag.clipped += int(np.sum(ratio > RATIO_CLIP))
            ratio = np.clip(ratio, 0.0, RATIO_CLIP)
        to_go = np.cumsum(r[::-1])[::-1]
        states.append(s)
        goals.append(g_rep)
        actions.append(a)
        weights.append(ratio * to_go)
        used += 1
    if not states:
        return [np.zeros_like(p) for p in policy.parameters()]
    grads = policy.log_prob_grad(
        np.concatenate(states), np.concatenate(goals), np.concatenate(actions), np.concatenate(weights)
    )
    return _scaled(grads, used)


@dataclass
class PgConfig:
    n_trajectories: int = 64
    lr: float = 1e-3
    baseline: str = "off"
    goals_per_episode: int = 4  # relabeled goals per episode (HPG only)
    eval_episodes: int = 100
    explore: ExploreCfg = field(default_factory=lambda: ExploreCfg("sample"))


class PolicyGradientTrainer:
    """Collect on-policy episodes, take one gradient step per iteration."""

    def __init__(self, policy, env: GoalEnv, cfg: PgConfig, hindsight: bool):
        self.policy = policy
        self.env = env
        self.cfg = cfg
        self.hindsight = hindsight
        self.opt = PolicyOptimizer(policy, cfg.lr)
        self.env_steps = 0
        self.iteration = 0
        self.diagnostics = HpgDiagnostics()
        self.clock = Stopwatch()

    def _pairs(self, trajs, rng):
        pairs = []
        for tr in trajs:
            pairs.append((tr, tr.goal))
            picks = rng.integers(len(tr), size=self.cfg.goals_per_episode)
            pairs.extend((tr, tr.achieved[j]) for j in picks)
        return pairs

    def step(self, collect_rngs, train_rng, eval_rng) -> MetricRow:
        act_fn = policy_act_fn(self.policy, self.cfg.explore)
        trajs = collect_parallel(self.env, act_fn, self.cfg.n_trajectories, collect_rngs)
        self.env_steps += sum(len(tr) for tr in trajs)
        if self.hindsight:
            grads = hpg_update(self.policy, self._pairs(trajs, train_rng), self.env.reward_fn, self.diagnostics)
        else:
            grads = reinforce_update(self.policy, trajs, self.cfg.baseline)
        objective = float(np.mean([tr.success for tr in trajs]))
        self.policy = self.opt.ascend(self.policy, grads)
        success = evaluate(self.policy, self.env, self.cfg.eval_episodes, eval_rng)
        row = MetricRow(self.iteration, self.env_steps, success, objective, 0, self.clock())
        self.iteration += 1
        return row
