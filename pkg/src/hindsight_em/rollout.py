"""Lockstep episode collection and greedy evaluation."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from .envs import GoalEnv, Trajectory
from .policy import GREEDY

# (states, goals, rng) -> (actions to execute, actions to store)
ActFn = Callable[[np.ndarray, np.ndarray, np.random.Generator], tuple[np.ndarray, np.ndarray]]


def policy_act_fn(policy, explore) -> ActFn:
    def fn(states, goals, rng):
        a = policy.act(states, goals, explore, rng)
        return a, a
    return fn


def collect(env: GoalEnv, act_fn: ActFn, n: int, rng: np.random.Generator) -> list[Trajectory]:
    """Run ``n`` episodes side by side; each stops at success or the horizon."""
    spec = env.spec
    starts = [env.reset(rng) for _ in range(n)]
    states = np.stack([s for s, _ in starts])
    goals = np.stack([g for _, g in starts])
    T = spec.horizon
    s_hist = np.zeros((n, T + 1, spec.state_dim))
    a_hist = np.zeros((n, T), dtype=np.int64) if spec.discrete else np.zeros((n, T, spec.action_dim))
    r_hist = np.zeros((n, T), dtype=np.int64)
    g_hist = np.zeros((n, T, spec.goal_dim))
    lengths = np.zeros(n, dtype=np.int64)
    s_hist[:, 0] = states
    active = np.arange(n)
    for t in range(T):
        if len(active) == 0:
            break
        cur = s_hist[active, t]
        executed, stored = act_fn(cur, goals[active], rng)
        nxt, r = env.step_batch(cur, goals[active], executed)
        s_hist[active, t + 1] = nxt
        a_hist[active, t] = stored
        r_hist[active, t] = r
        g_hist[active, t] = env.achieved_goal(nxt)
        lengths[active] = t + 1
        active = active[r == 0]
    return [
        Trajectory(goals[i], s_hist[i, : L + 1].copy(), a_hist[i, :L].copy(), r_hist[i, :L].copy(),
                   g_hist[i, :L].copy(), bool(r_hist[i, L - 1] == 1))
        for i, L in enumerate(lengths)
    ]


def collect_parallel(
    env: GoalEnv, act_fn: ActFn, n: int, rngs: list[np.random.Generator]
) -> list[Trajectory]:
    """Split ``n`` episodes across one RNG stream per worker; merge in worker order."""
    w = len(rngs)
    sizes = [n // w + (i < n % w) for i in range(w)]
    jobs = [(size, r) for size, r in zip(sizes, rngs) if size > 0]
    if len(jobs) == 1:
        return collect(env, act_fn, *jobs[0])
    with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
        parts = list(pool.map(lambda job: collect(env, act_fn, *job), jobs))
    return [tr for part in parts for tr in part]


def evaluate(policy, env: GoalEnv, episodes: int, rng: np.random.Generator) -> float:
    """Success rate of the greedy policy on fresh goals."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    trajs = collect(env, policy_act_fn(policy, GREEDY), episodes, rng)
    return sum(tr.success for tr in trajs) / episodes
