"""Gradient and oracle self-tests shared by the `check` subcommand and the test suite."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import estimator_lab as lab
from .algorithms.dqn_her import QNetwork
from .envs import make_env
from .nn import grad_check
from .policy import ExploreCfg, log_softmax, make_policy, softmax
from .replay import ReplayBuffer
from .rollout import collect, policy_act_fn

GRAD_TOL = 1e-5
ORACLE_TOL = 1e-12


@dataclass
class CheckResult:
    name: str
    value: float
    tol: float

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tol)


def policy_grad_error(policy, states, goals, actions, h: float = 1e-5) -> float:
    """Max relative error of log_prob_grad against central differences of mean log pi."""
    n = len(actions)
    params = policy.parameters()
    analytic = np.concatenate([g.ravel() / n for g in policy.log_prob_grad(states, goals, actions)])
    theta = np.concatenate([p.ravel() for p in params])

    def unflat(vec):
        out, pos = [], 0
        for p in params:
            out.append(vec[pos:pos + p.size].reshape(p.shape))
            pos += p.size
        return out

    def f(vec):
        return float(np.mean(policy.with_parameters(unflat(vec)).log_prob(states, goals, actions)))

    worst = 0.0
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        num = (f(tp) - f(tm)) / (2 * h)
        worst = max(worst, abs(num - analytic[i]) / max(abs(num), abs(analytic[i]), 1e-8))
    return worst


def _policy_probe(env_name: str, k: int, seed: int, n: int = 16):
    env = make_env(env_name, k)
    rng = np.random.default_rng(seed)
    policy = make_policy(env, (8, 8), seed, learn_log_std=True, init_log_std=math.log(0.3))
    trajs = collect(env, policy_act_fn(policy, ExploreCfg("sample")), 4, rng)
    states = np.concatenate([t.states[:-1] for t in trajs])[:n]
    goals = np.concatenate([np.repeat(t.goal[None], len(t), axis=0) for t in trajs])[:n]
    actions = np.concatenate([t.actions for t in trajs])[:n]
    return policy, states, goals, actions


def q_grad_error(seed: int = 0) -> float:
    env = make_env("flipbit", 4)
    rng = np.random.default_rng(seed)
    qnet = QNetwork.for_env(env, (8,), seed)
    buf = ReplayBuffer(env)
    for tr in collect(env, policy_act_fn(qnet, ExploreCfg("epsilon_uniform", 1.0)), 4, rng):
        buf.push(tr)
    batch = buf.sample_her_transition(16, rng, 4, "zero_one")
    targets = qnet.td_targets(batch) + rng.normal(0, 0.1, len(batch))
    return grad_check(lambda p: qnet.loss_and_grad(batch, targets, p), qnet.net)


def gradient_checks(seed: int = 0) -> list[CheckResult]:
    out = []
    for env_name, k in (("flipbit", 4), ("nav", 2), ("fourroom", None)):
        policy, s, g, a = _policy_probe(env_name, k, seed)
        out.append(CheckResult(f"grad {policy.kind} policy on {env_name}", policy_grad_error(policy, s, g, a), GRAD_TOL))
    out.append(CheckResult("grad Q loss on flipbit", q_grad_error(seed), GRAD_TOL))
    return out


def invariant_checks(probes: int = 10_000, seed: int = 0) -> list[CheckResult]:
    """Softmax sums to one and the logit score onehot(a) - softmax sums to zero."""
    rng = np.random.default_rng(seed)
    z = rng.normal(0, 10, size=(probes, 7))
    p = softmax(z)
    a = rng.integers(7, size=probes)
    score = -p
    score[np.arange(probes), a] += 1.0
    lsm_gap = np.max(np.abs(np.exp(log_softmax(z)) - p))
    return [
        CheckResult("softmax sums to 1", float(np.max(np.abs(p.sum(axis=1) - 1.0))), 1e-12),
        CheckResult("logit score sums to 0", float(np.max(np.abs(score.sum(axis=1)))), 1e-12),
        CheckResult("log_softmax matches softmax", float(lsm_gap), 1e-12),
    ]


def oracle_checks(ks=range(2, 65)) -> list[CheckResult]:
    """Enumeration oracles against the closed forms, and E[Y] = 0 for the control variate."""
    worst_r = worst_h = worst_cv = 0.0
    for k in ks:
        for delta in (0, 1):
            er, ar = lab.enumerate_reinforce(k, delta), lab.analytic_reinforce_moments(k, delta)
            eh, ah = lab.enumerate_hindsight(k, delta), lab.analytic_hindsight_moments(k, delta)
            worst_r = max(worst_r, abs(er.mean - ar.mean), abs(er.variance - ar.variance))
            worst_h = max(worst_h, abs(eh.mean - ah.mean), abs(eh.variance - ah.variance))
            worst_cv = max(worst_cv, abs(lab.control_variate_analysis(k, delta).mean_y))
    return [
        CheckResult("reinforce enumeration = closed form", worst_r, ORACLE_TOL),
        CheckResult("hindsight enumeration = closed form", worst_h, ORACLE_TOL),
        CheckResult("control variate has zero mean", worst_cv, ORACLE_TOL),
    ]


def run_all(seed: int = 0) -> list[CheckResult]:
    return [*gradient_checks(seed), *invariant_checks(seed=seed), *oracle_checks()]
