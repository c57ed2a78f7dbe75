"""Goal-conditioned stochastic policies.

All policy methods are batched: ``states`` and ``goals`` are (n, dim) arrays
(a single vector is promoted to a batch of one where noted). Parameters are
exposed as a flat list of arrays so one Adam implementation serves every
policy type; updates produce a new policy object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .nn import MlpParams, mlp_apply, mlp_backward, mlp_forward, mlp_init

LOG_STD_MIN = math.log(1e-3)
LOG_STD_MAX = 0.0
HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


@dataclass(frozen=True)
class ExploreCfg:
    """``sample`` draws from the policy itself; the others wrap it."""

    mode: str = "sample"  # sample | epsilon_uniform | gaussian_noise | greedy
    epsilon: float = 0.3
    sigma: float = 0.5

    def __post_init__(self) -> None:
        if self.mode not in ("sample", "epsilon_uniform", "gaussian_noise", "greedy"):
            raise ConfigError(f"unknown exploration mode {self.mode!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1]")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")


GREEDY = ExploreCfg("greedy")


def _batch(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x if x.ndim == 2 else x[None]


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(z))


class InputNormalizer:
    """Maps observations from their box [low, high] onto [-1, 1]."""

    def __init__(self, low, high):
        low = np.asarray(low, dtype=np.float64)
        high = np.asarray(high, dtype=np.float64)
        self.center = (high + low) / 2
        self.half = np.where(high > low, (high - low) / 2, 1.0)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return (x - self.center) / self.half


class BoxEncoder:
    """Network input = concat of box-normalized state and goal."""

    def __init__(self, state_box, goal_box):
        self.state_box = tuple(map(tuple, state_box))
        self.goal_box = tuple(map(tuple, goal_box))
        self._ns = InputNormalizer(*state_box)
        self._ng = InputNormalizer(*goal_box)
        self.dim = len(self.state_box[0]) + len(self.goal_box[0])

    def __call__(self, states, goals) -> np.ndarray:
        return np.concatenate([self._ns(_batch(states)), self._ng(_batch(goals))], axis=1)

    def to_json(self) -> dict:
        return {"kind": "box", "state_box": self.state_box, "goal_box": self.goal_box}


class CellEncoder:
    """Network input = one-hot free-cell index of state, then of goal."""

    def __init__(self, free_cells):
        self.free_cells = np.asarray(free_cells, dtype=np.int64)
        shape = self.free_cells.max(axis=0) + 1
        self._index = -np.ones(shape, dtype=np.int64)
        self._index[self.free_cells[:, 0], self.free_cells[:, 1]] = np.arange(len(self.free_cells))
        self.n = len(self.free_cells)
        self.dim = 2 * self.n

    def __call__(self, states, goals) -> np.ndarray:
        s = _batch(states).astype(np.int64)
        g = _batch(goals).astype(np.int64)
        rows = np.arange(len(s))
        out = np.zeros((len(s), self.dim))
        out[rows, self._index[s[:, 0], s[:, 1]]] = 1.0
        out[rows, self.n + self._index[g[:, 0], g[:, 1]]] = 1.0
        return out

    def to_json(self) -> dict:
        return {"kind": "cells", "free_cells": self.free_cells.tolist()}


def encoder_from_json(data: dict):
    if data["kind"] == "box":
        return BoxEncoder(data["state_box"], data["goal_box"])
    if data["kind"] == "cells":
        return CellEncoder(data["free_cells"])
    raise ConfigError(f"unknown encoder {data['kind']!r}")


def make_encoder(env):
    if hasattr(env, "free_cells"):
        return CellEncoder(env.free_cells)
    spec = env.spec
    box = (spec.obs_low or (0.0,) * spec.state_dim, spec.obs_high or (1.0,) * spec.state_dim)
    return BoxEncoder(box, box)


class CategoricalPolicy:
    """Softmax over MLP logits of concat(state, goal)."""

    kind = "categorical"

    def __init__(self, net: MlpParams, encoder):
        self.net = net
        self.encoder = encoder
        self.n_actions = net.layer_sizes[-1]

    def features(self, states, goals) -> np.ndarray:
        return self.encoder(states, goals)

    def logits(self, states, goals) -> np.ndarray:
        return mlp_apply(self.net, self.features(states, goals))

    def probs(self, states, goals) -> np.ndarray:
        return softmax(self.logits(states, goals))

    def act(self, states, goals, explore: ExploreCfg, rng: np.random.Generator) -> np.ndarray:
        z = self.logits(states, goals)
        if explore.mode == "greedy":
            return np.argmax(z, axis=1)  # ties go to the lowest index
        p = softmax(z)
        u = rng.random(len(p))
        actions = (p.cumsum(axis=1) < u[:, None]).sum(axis=1)
        actions = np.minimum(actions, self.n_actions - 1)
        if explore.mode == "epsilon_uniform" and explore.epsilon > 0:
            swap = rng.random(len(p)) < explore.epsilon
            actions = np.where(swap, rng.integers(self.n_actions, size=len(p)), actions)
        return actions

    def log_prob(self, states, goals, actions) -> np.ndarray:
        a = np.asarray(actions, dtype=np.int64).reshape(-1)
        lp = log_softmax(self.logits(states, goals))
        return lp[np.arange(len(a)), a]

    def log_prob_grad(self, states, goals, actions, weights=None) -> list[np.ndarray]:
        """Gradient of ``sum_i w_i log pi(a_i | s_i, g_i)`` as a parameter list."""
        a = np.asarray(actions, dtype=np.int64).reshape(-1)
        z, cache = mlp_forward(self.net, self.features(states, goals))
        g = -softmax(z)
        g[np.arange(len(a)), a] += 1.0
        if weights is not None:
            g *= np.asarray(weights, dtype=np.float64)[:, None]
        return mlp_backward(self.net, cache, g).arrays()

    def parameters(self) -> list[np.ndarray]:
        return self.net.arrays()

    def with_parameters(self, arrays) -> "CategoricalPolicy":
        n = len(self.net.weights)
        net = MlpParams(self.net.layer_sizes, list(arrays[:n]), list(arrays[n:]))
        return CategoricalPolicy(net, self.encoder)

    def to_json(self) -> dict:
        return {"mode": self.kind, "net": self.net.to_json(), "encoder": self.encoder.to_json()}


class GaussianPolicy:
    """Diagonal Gaussian with MLP mean and a global learnable log-std."""

    kind = "gaussian"

    def __init__(self, mean_net: MlpParams, log_std: np.ndarray, encoder, learn_log_std: bool = True):
        self.net = mean_net
        self.encoder = encoder
        self.learn_log_std = learn_log_std
        self.log_std = np.clip(np.asarray(log_std, dtype=np.float64), LOG_STD_MIN, LOG_STD_MAX)
        self.action_dim = mean_net.layer_sizes[-1]
        if self.log_std.shape != (self.action_dim,):
            raise ConfigError("log_std must have one entry per action dimension")

    def features(self, states, goals) -> np.ndarray:
        return self.encoder(states, goals)

    def mean(self, states, goals) -> np.ndarray:
        return mlp_apply(self.net, self.features(states, goals))

    def act(self, states, goals, explore: ExploreCfg, rng: np.random.Generator) -> np.ndarray:
        mu = self.mean(states, goals)
        if explore.mode == "greedy":
            return mu
        a = mu + np.exp(self.log_std) * rng.standard_normal(mu.shape)
        if explore.mode == "gaussian_noise" and explore.sigma > 0:
            a = a + explore.sigma * rng.standard_normal(mu.shape)
        return a

    def log_prob(self, states, goals, actions) -> np.ndarray:
        mu = self.mean(states, goals)
        a = np.asarray(actions, dtype=np.float64).reshape(mu.shape)
        var = np.exp(2 * self.log_std)
        return np.sum(-((a - mu) ** 2) / (2 * var) - self.log_std - HALF_LOG_2PI, axis=1)

    def log_prob_grad(self, states, goals, actions, weights=None) -> list[np.ndarray]:
        """Gradient list: mean-net arrays followed by d/d log_std."""
        mu, cache = mlp_forward(self.net, self.features(states, goals))
        a = np.asarray(actions, dtype=np.float64).reshape(mu.shape)
        var = np.exp(2 * self.log_std)
        d_mu = (a - mu) / var
        d_log_std = (a - mu) ** 2 / var - 1.0
        if weights is not None:
            w = np.asarray(weights, dtype=np.float64)[:, None]
            d_mu, d_log_std = d_mu * w, d_log_std * w
        d_log_std = d_log_std.sum(axis=0)
        if not self.learn_log_std:
            d_log_std = np.zeros_like(d_log_std)
        return [*mlp_backward(self.net, cache, d_mu).arrays(), d_log_std]

    def parameters(self) -> list[np.ndarray]:
        return [*self.net.arrays(), self.log_std]

    def with_parameters(self, arrays) -> "GaussianPolicy":
        n = len(self.net.weights)
        net = MlpParams(self.net.layer_sizes, list(arrays[:n]), list(arrays[n : 2 * n]))
        log_std = arrays[2 * n] if self.learn_log_std else self.log_std
        return GaussianPolicy(net, log_std, self.encoder, self.learn_log_std)

    def to_json(self) -> dict:
        return {"mode": self.kind, "net": self.net.to_json(), "log_std": self.log_std.tolist(),
                "learn_log_std": self.learn_log_std, "encoder": self.encoder.to_json()}


class TabularPolicy:
    """Logit table L[a, g] for the one-step MDP; goals are integer indices."""

    kind = "tabular"

    def __init__(self, table: np.ndarray):
        self.table = np.asarray(table, dtype=np.float64)
        self.n_actions = self.table.shape[0]

    @classmethod
    def uniform(cls, k: int) -> "TabularPolicy":
        return cls(np.zeros((k, k)))

    @staticmethod
    def _goal_index(goals) -> np.ndarray:
        return np.asarray(goals, dtype=np.float64).reshape(-1).astype(np.int64)

    def probs(self, states, goals) -> np.ndarray:
        return softmax(self.table[:, self._goal_index(goals)].T)

    def act(self, states, goals, explore: ExploreCfg, rng: np.random.Generator) -> np.ndarray:
        z = self.table[:, self._goal_index(goals)].T
        if explore.mode == "greedy":
            return np.argmax(z, axis=1)
        p = softmax(z)
        actions = np.minimum((p.cumsum(axis=1) < rng.random(len(p))[:, None]).sum(axis=1),
                             self.n_actions - 1)
        if explore.mode == "epsilon_uniform" and explore.epsilon > 0:
            swap = rng.random(len(p)) < explore.epsilon
            actions = np.where(swap, rng.integers(self.n_actions, size=len(p)), actions)
        return actions

    def log_prob(self, states, goals, actions) -> np.ndarray:
        a = np.asarray(actions, dtype=np.int64).reshape(-1)
        lp = log_softmax(self.table[:, self._goal_index(goals)].T)
        return lp[np.arange(len(a)), a]

    def log_prob_grad(self, states, goals, actions, weights=None) -> list[np.ndarray]:
        """d/dL[a', g'] = delta(g', g) (delta(a', a) - pi(a' | g)), summed over the batch."""
        g = self._goal_index(goals)
        a = np.asarray(actions, dtype=np.int64).reshape(-1)
        w = np.ones(len(a)) if weights is None else np.asarray(weights, dtype=np.float64)
        p = softmax(self.table[:, g].T)
        score = -p
        score[np.arange(len(a)), a] += 1.0
        grad = np.zeros_like(self.table)
        np.add.at(grad.T, g, score * w[:, None])
        return [grad]

    def parameters(self) -> list[np.ndarray]:
        return [self.table]

    def with_parameters(self, arrays) -> "TabularPolicy":
        return TabularPolicy(arrays[0])

    def to_json(self) -> dict:
        return {"mode": self.kind, "table": self.table.tolist()}


def make_policy(
    env, hidden=(64, 64), seed: int = 0,
    init_log_std: float = math.log(0.2), learn_log_std: bool = True,
):
    spec = env.spec
    encoder = make_encoder(env)
    if spec.discrete:
        return CategoricalPolicy(mlp_init([encoder.dim, *hidden, spec.n_actions], seed), encoder)
    net = mlp_init([encoder.dim, *hidden, spec.action_dim], seed)
    return GaussianPolicy(net, np.full(spec.action_dim, init_log_std), encoder, learn_log_std)


def policy_from_json(data: dict):
    mode = data["mode"]
    if mode == "tabular":
        return TabularPolicy(np.asarray(data["table"]))
    net = MlpParams.from_json(data["net"])
    encoder = encoder_from_json(data["encoder"])
    if mode == "categorical":
        return CategoricalPolicy(net, encoder)
    if mode == "gaussian":
        return GaussianPolicy(net, np.asarray(data["log_std"]), encoder, data.get("learn_log_std", True))
    raise ConfigError(f"unknown policy mode {mode!r}")


# Single-sample conveniences mirroring the batched methods.

def act(policy, state, goal, explore: ExploreCfg, rng: np.random.Generator):
    out = policy.act(_batch(state), _batch(goal), explore, rng)
    return out[0]


def log_prob(policy, state, goal, action) -> float:
    a = np.asarray(action)
    return float(policy.log_prob(_batch(state), _batch(goal), a[None] if a.ndim else [a])[0])


def log_prob_grad(policy, state, goal, action) -> list[np.ndarray]:
    a = np.asarray(action)
    return policy.log_prob_grad(_batch(state), _batch(goal), a[None] if a.ndim else [a])
