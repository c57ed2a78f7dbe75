"""Pieces shared by the trainers: metric rows, the ascent optimizer, a stopwatch."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..nn import AdamState, adam_update_arrays

CSV_FIELDS = ("iteration", "env_steps", "success_rate", "m_step_objective", "buffer_size", "wall_clock_s")


@dataclass
class MetricRow:
    iteration: int
    env_steps: int
    success_rate: float
    m_step_objective: float
    buffer_size: int
    wall_clock_s: float = 0.0

    def as_csv(self) -> list[str]:
        return [
            str(self.iteration),
            str(self.env_steps),
            f"{self.success_rate:.6f}",
            f"{self.m_step_objective:.10g}",
            str(self.buffer_size),
            f"{self.wall_clock_s:.3f}",
        ]


class PolicyOptimizer:
    """Adam over a policy's parameter list; ascends the given gradient."""

    def __init__(self, policy, lr: float = 1e-3):
        self.lr = lr
        self.state = AdamState.for_arrays(policy.parameters())

    def ascend(self, policy, grads: list[np.ndarray]):
        new, self.state = adam_update_arrays(
            self.state, policy.parameters(), [-g for g in grads], self.lr
        )
        return policy.with_parameters(new)


class Stopwatch:
    def __init__(self):
        self.start = time.perf_counter()

    def __call__(self) -> float:
        return time.perf_counter() - self.start
