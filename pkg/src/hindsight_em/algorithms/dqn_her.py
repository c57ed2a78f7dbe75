"""DQN with hindsight experience replay for discrete-action goal tasks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..envs import GoalEnv
from ..errors import ConfigError, StateError
from ..nn import AdamState, MlpParams, adam_step, mlp_apply, mlp_backward, mlp_forward, mlp_init
from ..policy import ExploreCfg, make_encoder
from ..replay import ReplayBuffer, TransitionBatch
from ..rollout import collect_parallel, evaluate, policy_act_fn
from .common import MetricRow, Stopwatch

REWARD_MODES = ("zero_one", "minus_one_zero")


class QNetwork:
    """Q(s, a, g) for all actions at once, plus a periodically synced target copy."""

    def __init__(self, net: MlpParams, encoder, gamma: float = 0.98,
                 sync_interval: int = 200, reward_mode: str = "zero_one", lr: float = 1e-3):
        if not 0.0 < gamma < 1.0:
            raise ConfigError("gamma must lie in (0, 1)")
        if reward_mode not in REWARD_MODES:
            raise ConfigError(f"reward_mode must be one of {REWARD_MODES}")
        self.net = net
        self.target_net = net.copy()
        self.gamma = gamma
        self.sync_interval = sync_interval
        self.reward_mode = reward_mode
        self.lr = lr
        self.adam = AdamState.for_params(net)
        self.updates = 0
        self.encoder = encoder
        self.n_actions = net.layer_sizes[-1]

    @classmethod
    def for_env(cls, env: GoalEnv, hidden=(256,), seed: int = 0, **kw) -> "QNetwork":
        spec = env.spec
        if not spec.discrete:
            raise ConfigError("DQN needs a discrete action space")
        encoder = make_encoder(env)
        net = mlp_init([encoder.dim, *hidden, spec.n_actions], seed)
        return cls(net, encoder, **kw)

    @property
    def target_range(self) -> tuple[float, float]:
        # episodes end at the first success, so a 0/1 return never exceeds 1
        if self.reward_mode == "zero_one":
            return 0.0, 1.0
        return -1.0 / (1.0 - self.gamma), 0.0

    def features(self, states, goals) -> np.ndarray:
        return self.encoder(states, goals)

    def q_values(self, states, goals, target: bool = False) -> np.ndarray:
        return mlp_apply(self.target_net if target else self.net, self.features(states, goals))

    def act(self, states, goals, explore: ExploreCfg, rng: np.random.Generator) -> np.ndarray:
        actions = np.argmax(self.q_values(states, goals), axis=1)
        if explore.mode == "epsilon_uniform" and explore.epsilon > 0:
            swap = rng.random(len(actions)) < explore.epsilon
            actions = np.where(swap, rng.integers(self.n_actions, size=len(actions)), actions)
        return actions

    def td_targets(self, batch: TransitionBatch) -> np.ndarray:
        boot = self.q_values(batch.next_states, batch.goals, target=True).max(axis=1)
        y = batch.rewards + self.gamma * (1.0 - batch.dones) * boot
        return np.clip(y, *self.target_range)

    def loss_and_grad(self, batch: TransitionBatch, targets: np.ndarray, net: MlpParams | None = None):
        net = self.net if net is None else net
        q, cache = mlp_forward(net, self.features(batch.states, batch.goals))
        rows = np.arange(len(batch))
        a = np.asarray(batch.actions, dtype=np.int64)
        err = q[rows, a] - targets
        out_grad = np.zeros_like(q)
        out_grad[rows, a] = 2.0 * err / len(batch)
        return float(np.mean(err**2)), mlp_backward(net, cache, out_grad)

    def update(self, batch: TransitionBatch, targets: np.ndarray | None = None) -> float:
        targets = self.td_targets(batch) if targets is None else targets
        loss, grads = self.loss_and_grad(batch, targets)
        self.net, self.adam = adam_step(self.adam, self.net, grads, self.lr)
        self.updates += 1
        if self.updates % self.sync_interval == 0:
            self.target_net = self.net.copy()
        return loss

    def to_json(self) -> dict:
        return {"mode": "qnet", "net": self.net.to_json(), "gamma": self.gamma,
                "reward_mode": self.reward_mode, "encoder": self.encoder.to_json()}


def dqn_her_update(qnet: QNetwork, buffer: ReplayBuffer, batch_size: int,
                   rng: np.random.Generator, k_her: int = 4) -> float:
    if len(buffer) == 0:
        raise StateError("cannot train on an empty buffer")
    batch = buffer.sample_her_transition(batch_size, rng, k_her, qnet.reward_mode)
    return qnet.update(batch)


@dataclass
class DqnConfig:
    n_trajectories: int = 16
    gradient_steps: int = 40
    batch_size: int = 128
    k_her: int = 4
    explore: ExploreCfg = field(default_factory=lambda: ExploreCfg("epsilon_uniform", epsilon=0.3))
    eval_episodes: int = 100


class DqnHerTrainer:
    def __init__(self, qnet: QNetwork, env: GoalEnv, cfg: DqnConfig, capacity: int = 1_000_000):
        self.qnet = qnet
        self.env = env
        self.cfg = cfg
        self.buffer = ReplayBuffer(env, capacity)
        self.env_steps = 0
        self.iteration = 0
        self.clock = Stopwatch()

    @property
    def policy(self):
        return self.qnet

    def step(self, collect_rngs, train_rng, eval_rng) -> MetricRow:
        act_fn = policy_act_fn(self.qnet, self.cfg.explore)
        for tr in collect_parallel(self.env, act_fn, self.cfg.n_trajectories, collect_rngs):
            self.buffer.push(tr)
            self.env_steps += len(tr)
        loss = float("nan")
        for _ in range(self.cfg.gradient_steps):
            loss = dqn_her_update(self.qnet, self.buffer, self.cfg.batch_size, train_rng, self.cfg.k_her)
        success = evaluate(self.qnet, self.env, self.cfg.eval_episodes, eval_rng)
        row = MetricRow(self.iteration, self.env_steps, success, loss, len(self.buffer), self.clock())
        self.iteration += 1
        return row
