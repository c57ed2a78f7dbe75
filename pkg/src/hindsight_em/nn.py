"""Dense relu network with hand-written backprop and Adam.

Everything runs in float64. Forward and backward accept either a single
input vector or a batch (rows are samples); batched gradients are summed
over the batch, so callers scale ``output_grad`` to get a mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError


@dataclass
class MlpParams:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]  # each (out, in)
    biases: list[np.ndarray]

    def __post_init__(self) -> None:
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        n = len(self.layer_sizes) - 1
        if len(self.weights) != n or len(self.biases) != n:
            raise ShapeError(f"expected {n} weight/bias layers")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_sizes[i + 1], self.layer_sizes[i])
            if w.shape != shape or b.shape != (shape[0],):
                raise ShapeError(f"layer {i}: got {w.shape}/{b.shape}, want {shape}")

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> "MlpParams":
        return MlpParams(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def zeros_like(self) -> "MlpParams":
        return MlpParams(
            self.layer_sizes,
            [np.zeros_like(w) for w in self.weights],
            [np.zeros_like(b) for b in self.biases],
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec: np.ndarray) -> "MlpParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.n_params,):
            raise ShapeError(f"flat vector has shape {vec.shape}, want ({self.n_params},)")
        out, pos = [], 0
        for a in self.arrays():
            out.append(vec[pos : pos + a.size].reshape(a.shape).copy())
            pos += a.size
        n = len(self.weights)
        return MlpParams(self.layer_sizes, out[:n], out[n:])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def check_congruent(self, other: "MlpParams") -> None:
        if self.layer_sizes != other.layer_sizes:
            raise ShapeError(f"layer sizes differ: {self.layer_sizes} vs {other.layer_sizes}")

    # checkpoint format: header + row-major weights then biases, flat
    def to_json(self) -> dict:
        return {"layer_sizes": list(self.layer_sizes), "params": self.flat().tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "MlpParams":
        template = mlp_init(data["layer_sizes"], seed=0)
        return template.with_flat(np.asarray(data["params"], dtype=np.float64))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


# Gradients share the parameter layout.
GradBundle = MlpParams


@dataclass
class ForwardCache:
    layer_sizes: tuple[int, ...]
    inputs: list[np.ndarray]  # input to each layer, batch-major
    pre: list[np.ndarray]  # pre-activations of each layer
    batched: bool


def mlp_init(layer_sizes: Sequence[int], seed: int | np.random.Generator) -> MlpParams:
    sizes = list(layer_sizes)
    if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
        raise ConfigError(f"layer_sizes must have >= 2 positive entries, got {sizes}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(1.0 / fan_in)
        weights.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(tuple(sizes), weights, biases)


def mlp_forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    h = x if batched else x[None, :]
    if h.ndim != 2 or h.shape[1] != params.layer_sizes[0]:
        raise ShapeError(f"input shape {x.shape} does not match input size {params.layer_sizes[0]}")
    inputs, pre = [], []
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w.T + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
    cache = ForwardCache(params.layer_sizes, inputs, pre, batched)
    return (h if batched else h[0]), cache


def mlp_apply(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Forward pass without keeping the cache."""
    x = np.asarray(x, dtype=np.float64)
    h = x if x.ndim == 2 else x[None, :]
    if h.shape[1] != params.layer_sizes[0]:
        raise ShapeError(f"input shape {x.shape} does not match input size {params.layer_sizes[0]}")
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i != last:
            h = np.maximum(h, 0.0)
    return h if x.ndim == 2 else h[0]


def mlp_backward(
    params: MlpParams, cache: ForwardCache, output_grad: np.ndarray, return_input_grad: bool = False
):
    """Reverse-mode gradient of ``sum(output * output_grad)``."""
    if cache.layer_sizes != params.layer_sizes or len(cache.pre) != len(params.weights):
        raise ShapeError("cache was produced by a different network")
    g = np.asarray(output_grad, dtype=np.float64)
    g = g if cache.batched else g[None, :]
    if g.shape != cache.pre[-1].shape:
        raise ShapeError(f"output_grad shape {g.shape} does not match output {cache.pre[-1].shape}")
    n = len(params.weights)
    dw, db = [None] * n, [None] * n
    for i in range(n - 1, -1, -1):
        if i != n - 1:
            g = g * (cache.pre[i] > 0.0)
        dw[i] = g.T @ cache.inputs[i]
        db[i] = g.sum(axis=0)
        g = g @ params.weights[i]
    grads = MlpParams(params.layer_sizes, dw, db)
    if return_input_grad:
        return grads, (g if cache.batched else g[0])
    return grads


@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_arrays(cls, arrays: Sequence[np.ndarray], **kw) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **kw)

    @classmethod
    def for_params(cls, params: MlpParams, **kw) -> "AdamState":
        return cls.for_arrays(params.arrays(), **kw)


def adam_update_arrays(
    state: AdamState, arrays: Sequence[np.ndarray], grads: Sequence[np.ndarray], lr: float
) -> tuple[list[np.ndarray], AdamState]:
    """Descent step on a list of arrays; inputs are left untouched."""
    if len(arrays) != len(grads) or len(arrays) != len(state.first_moment):
        raise ShapeError("Adam state, parameters and gradients have different layouts")
    for a, g, m in zip(arrays, grads, state.first_moment):
        if a.shape != g.shape or a.shape != m.shape:
            raise ShapeError(f"shape mismatch in Adam update: {a.shape} {g.shape} {m.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient; update refused")
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_a = [], [], []
    for a, g, m, v in zip(arrays, grads, state.first_moment, state.second_moment):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_a.append(a - lr * m_hat / (np.sqrt(v_hat) + state.epsilon))
        new_m.append(m)
        new_v.append(v)
    return new_a, AdamState(new_m, new_v, t, b1, b2, state.epsilon)


def adam_step(
    state: AdamState, params: MlpParams, grads: GradBundle, lr: float
) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam descent step; negate ``grads`` to ascend."""
    params.check_congruent(grads)
    new, state = adam_update_arrays(state, params.arrays(), grads.arrays(), lr)
    n = len(params.weights)
    return MlpParams(params.layer_sizes, new[:n], new[n:]), state


def grad_check(
    loss: Callable[[MlpParams], tuple[float, GradBundle]],
    params: MlpParams,
    h: float = 1e-5,
    max_coords: int = 10_000,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss`` returns ``(value, grad)``. Above ``max_coords`` parameters a fixed
    random subsample of coordinates is checked.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    value, analytic = loss(params)
    if not np.isfinite(value):
        raise NumericalError("loss is not finite")
    theta = params.flat()
    ga = analytic.flat()
    coords = np.arange(theta.size)
    if theta.size > max_coords:
        coords = np.sort(np.random.default_rng(seed).choice(theta.size, max_coords, replace=False))
    worst = 0.0
    for i in coords:
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        fp = loss(params.with_flat(tp))[0]
        fm = loss(params.with_flat(tm))[0]
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalError("loss is not finite")
        num = (fp - fm) / (2 * h)
        denom = max(abs(ga[i]), abs(num), 1e-8)
        worst = max(worst, abs(ga[i] - num) / denom)
    return worst
