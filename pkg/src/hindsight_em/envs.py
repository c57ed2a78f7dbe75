"""Goal-conditioned episodic environments with binary success rewards.

Each environment is a pure transition function; randomness only enters
through the generator handed to ``reset``. ``step_batch``, ``reward_fn`` and
``achieved_goal`` broadcast over a leading batch axis so rollouts can run
many episodes in lockstep.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError


@dataclass(frozen=True)
class GoalEnvSpec:
    name: str
    state_dim: int
    goal_dim: int
    horizon: int
    n_actions: int | None = None  # discrete
    action_low: tuple[float, ...] | None = None  # continuous box
    action_high: tuple[float, ...] | None = None
    obs_low: tuple[float, ...] | None = None
    obs_high: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.n_actions is not None:
            if self.n_actions < 2:
                raise ConfigError("discrete action space needs >= 2 actions")
        elif self.action_low is None or self.action_high is None:
            raise ConfigError("specify n_actions or a continuous action box")
        elif not np.all(np.less(self.action_low, self.action_high)):
            raise ConfigError("action box needs low < high in every dimension")

    @property
    def discrete(self) -> bool:
        return self.n_actions is not None

    @property
    def action_dim(self) -> int:
        return 1 if self.discrete else len(self.action_low)


@dataclass
class StepResult:
    next_state: np.ndarray
    reward: int
    done: bool
    success: bool


@dataclass
class Trajectory:
    goal: np.ndarray
    states: np.ndarray  # (L+1, state_dim)
    actions: np.ndarray  # (L,) int or (L, action_dim) float
    rewards: np.ndarray  # (L,)
    achieved: np.ndarray  # (L, goal_dim): achieved goal of states[1:]
    success: bool

    def __len__(self) -> int:
        return len(self.actions)

    def validate(self) -> None:
        n = len(self.actions)
        if n < 1:
            raise InputError("trajectory has no transitions")
        if len(self.states) != n + 1 or len(self.rewards) != n or len(self.achieved) != n:
            raise InputError("trajectory arrays have inconsistent lengths")
        if not np.all((self.rewards == 0) | (self.rewards == 1)):
            raise InputError("rewards must be binary")
        if bool(self.success) != bool(self.rewards[-1] == 1):
            raise InputError("success flag must match the final reward")
        if np.any(self.rewards[:-1] == 1):
            raise InputError("episode must terminate at the first success")


class GoalEnv:
    spec: GoalEnvSpec

    def reset(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def transition(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def achieved_goal(self, state: np.ndarray) -> np.ndarray:
        return np.asarray(state, dtype=np.float64).copy()

    def reward_fn(self, next_state: np.ndarray, goal: np.ndarray) -> np.ndarray | int:
        raise NotImplementedError

    def check_action(self, actions: np.ndarray) -> None:
        if self.spec.discrete:
            a = np.asarray(actions)
            if np.any(a < 0) or np.any(a >= self.spec.n_actions) or np.any(a != np.floor(a)):
                raise InputError(f"discrete action out of range [0, {self.spec.n_actions})")

    def step_batch(self, states, goals, actions) -> tuple[np.ndarray, np.ndarray]:
        self.check_action(actions)
        nxt = self.transition(np.asarray(states, dtype=np.float64), actions)
        return nxt, np.asarray(self.reward_fn(nxt, goals), dtype=np.int64)

    def step(self, state, goal, action) -> StepResult:
        state = np.asarray(state, dtype=np.float64)
        action = np.asarray(action)
        nxt, r = self.step_batch(state[None], np.asarray(goal)[None], action[None])
        r = int(r[0])
        return StepResult(nxt[0], r, bool(r), bool(r))


def _as_batch(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    return (x, True) if x.ndim == 2 else (x[None], False)


class FlipBitEnv(GoalEnv):
    """K bits; action i toggles bit i; success when the state equals the goal."""

    def __init__(self, k: int, horizon: int | None = None):
        if k < 1:
            raise ConfigError("flip-bit needs K >= 1")
        self.k = k
        # K=1 still needs a 2-action space; action 1 is then a no-op
        n_actions = max(k, 2)
        self.spec = GoalEnvSpec(
            "flipbit", k, k, horizon or k, n_actions=n_actions,
            obs_low=(0.0,) * k, obs_high=(1.0,) * k,
        )

    def reset(self, rng):
        while True:
            state = rng.integers(0, 2, size=self.k).astype(np.float64)
            goal = rng.integers(0, 2, size=self.k).astype(np.float64)
            if not np.array_equal(state, goal):
                return state, goal

    def transition(self, states, actions):
        nxt = states.copy()
        a = np.asarray(actions, dtype=np.int64)
        rows = np.arange(len(nxt))
        valid = a < self.k
        nxt[rows[valid], a[valid]] = 1.0 - nxt[rows[valid], a[valid]]
        return nxt

    def reward_fn(self, next_state, goal):
        s, batched = _as_batch(next_state)
        g, _ = _as_batch(goal)
        r = np.all(s == g, axis=-1).astype(np.int64)
        return r if batched else int(r[0])


class NavigationEnv(GoalEnv):
    """Point mass in [-1, 1]^K; actions are displacements clipped to +-0.2."""

    max_step = 0.2
    tol = 0.1

    def __init__(self, k: int, horizon: int = 50):
        if k < 1:
            raise ConfigError("navigation needs K >= 1")
        self.k = k
        self.spec = GoalEnvSpec(
            "nav", k, k, horizon,
            action_low=(-self.max_step,) * k, action_high=(self.max_step,) * k,
            obs_low=(-1.0,) * k, obs_high=(1.0,) * k,
        )

    def reset(self, rng):
        state = np.zeros(self.k)
        while True:
            goal = rng.uniform(-1.0, 1.0, size=self.k)
            if np.linalg.norm(goal - state) >= self.tol:
                return state, goal

    def transition(self, states, actions):
        a = np.clip(np.asarray(actions, dtype=np.float64), -self.max_step, self.max_step)
        return np.clip(states + a, -1.0, 1.0)

    def reward_fn(self, next_state, goal):
        s, batched = _as_batch(next_state)
        g, _ = _as_batch(goal)
        r = (np.linalg.norm(s - g, axis=-1) < self.tol).astype(np.int64)
        return r if batched else int(r[0])


FOUR_ROOM_LAYOUT = (
    "#############",
    "#     #     #",
    "#     #     #",
    "#           #",
    "#     #     #",
    "#     #     #",
    "## ####     #",
    "#     ### ###",
    "#     #     #",
    "#     #     #",
    "#           #",
    "#     #     #",
    "#############",
)

# up, down, left, right as (row, col) deltas
_MOVES = np.array([[-1, 0], [1, 0], [0, -1], [0, 1]], dtype=np.float64)


class FourRoomEnv(GoalEnv):
    """Grid world of four rooms joined by doorways; states are (row, col) cells."""

    def __init__(self, layout: tuple[str, ...] = FOUR_ROOM_LAYOUT, horizon: int = 50):
        self.walls = np.array([[c == "#" for c in row] for row in layout])
        self.free_cells = np.argwhere(~self.walls).astype(np.float64)
        if len(self.free_cells) < 2:
            raise ConfigError("layout needs at least two free cells")
        if not self._connected():
            raise ConfigError("every free cell must be reachable from every other")
        h, w = self.walls.shape
        self.spec = GoalEnvSpec(
            "fourroom", 2, 2, horizon, n_actions=4,
            obs_low=(0.0, 0.0), obs_high=(h - 1.0, w - 1.0),
        )

    def _connected(self) -> bool:
        start = tuple(int(v) for v in self.free_cells[0])
        seen = {start}
        queue = deque([start])
        while queue:
            r, c = queue.popleft()
            for dr, dc in _MOVES.astype(int):
                nb = (r + dr, c + dc)
                if nb not in seen and not self.walls[nb]:
                    seen.add(nb)
                    queue.append(nb)
        return len(seen) == len(self.free_cells)

    def reset(self, rng):
        i, j = rng.choice(len(self.free_cells), size=2, replace=False)
        return self.free_cells[i].copy(), self.free_cells[j].copy()

    def transition(self, states, actions):
        a = np.asarray(actions, dtype=np.int64)
        cand = states + _MOVES[a]
        r = cand[:, 0].astype(int)
        c = cand[:, 1].astype(int)
        blocked = self.walls[r, c]
        return np.where(blocked[:, None], states, cand)

    def reward_fn(self, next_state, goal):
        s, batched = _as_batch(next_state)
        g, _ = _as_batch(goal)
        r = np.all(s == g, axis=-1).astype(np.int64)
        return r if batched else int(r[0])


class OneStepEnv(GoalEnv):
    """Single state, k actions equal to k goals, reward I[a = g].

    The start state is [-1]; taking action b lands in the terminal state [b],
    whose achieved goal is b.
    """

    def __init__(self, k: int):
        if k < 2:
            raise InputError("one-step MDP needs k >= 2")
        self.k = k
        self.spec = GoalEnvSpec("onestep", 1, 1, 1, n_actions=k, obs_low=(-1.0,), obs_high=(k - 1.0,))

    def reset(self, rng):
        return np.array([-1.0]), np.array([float(rng.integers(self.k))])

    def transition(self, states, actions):
        return np.asarray(actions, dtype=np.float64).reshape(-1, 1)

    def reward_fn(self, next_state, goal):
        s, batched = _as_batch(next_state)
        g, _ = _as_batch(goal)
        r = np.all(s == g, axis=-1).astype(np.int64)
        return r if batched else int(r[0])


def make_env(name: str, k: int | None = None, horizon: int | None = None) -> GoalEnv:
    if name == "flipbit":
        return FlipBitEnv(k or 5, horizon)
    if name == "nav":
        return NavigationEnv(k or 2, horizon or 50)
    if name == "fourroom":
        return FourRoomEnv(horizon=horizon or 50)
    if name == "onestep":
        return OneStepEnv(k or 2)
    raise ConfigError(f"unknown environment {name!r}")
