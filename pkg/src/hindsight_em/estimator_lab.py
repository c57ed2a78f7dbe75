"""Exact and sampled moments of logit-gradient estimators on the one-step MDP.

Setting: one state, k actions equal to k goals, reward I[a = g], uniform goal
prior, and a tabular softmax policy at uniform initialization (pi = 1/k).
The estimators target the gradient of the success probability with respect
to one logit L[a, g]; ``delta`` selects a diagonal (a = g) or off-diagonal
coordinate.

* on-policy REINFORCE: eta = r(b, g') * dlog pi(b | g') / dL[a, g] with
  g' ~ p and b ~ pi(. | g').
* hindsight: b ~ pi, then g' = b (the goal the sample achieved), and the
  score is divided by k.

Closed forms and brute-force enumerations live side by side so each can be
checked against the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

ENUMERATION_CAP = 4096
CSV_COLUMNS = ("k", "delta", "estimator", "mean", "variance", "mse", "rel_err", "source")


@dataclass(frozen=True)
class EstimatorMoments:
    mean: float
    variance: float
    mse: float
    relative_error: float
    delta: int
    k: int
    source: str  # exact_formula | enumeration | monte_carlo(n)
    estimator: str = "reinforce"

    def csv_row(self) -> list:
        return [self.k, self.delta, self.estimator, repr(self.mean), repr(self.variance),
                repr(self.mse), repr(self.relative_error), self.source]


def _check(k: int, delta: int) -> None:
    if k < 2:
        raise InputError("the one-step MDP needs k >= 2")
    if delta not in (0, 1):
        raise InputError("delta must be 0 or 1")


def true_gradient(k: int, delta: int) -> float:
    """dJ/dL[a, g] at uniform logits.

    J = (1/k) sum_g pi(g | g), and d pi(g | g) / dL[a, g] = pi(g|g) (delta - pi(a|g)).
    """
    _check(k, delta)
    return (1.0 / k) * (1.0 / k) * (delta - 1.0 / k)


def _moments(mean, second, reference, k, delta, source, estimator) -> EstimatorMoments:
    variance = second - mean * mean
    mse = variance + (mean - reference) ** 2
    return EstimatorMoments(
        mean, variance, mse, math.sqrt(max(mse, 0.0)) / abs(reference), delta, k, source, estimator
    )


def analytic_reinforce_moments(k: int, delta: int) -> EstimatorMoments:
    _check(k, delta)
    mean = delta / k**2 - 1 / k**3
    variance = delta * (1 / k**2 + 2 / k**5 - 2 / k**3 - 1 / k**4) + 1 / k**4 - 1 / k**6
    return EstimatorMoments(mean, variance, variance, math.sqrt(variance) / abs(mean),
                            delta, k, "exact_formula", "reinforce")


def analytic_hindsight_moments(k: int, delta: int) -> EstimatorMoments:
    _check(k, delta)
    mean = delta / k**2 - 1 / k**3
    second = (delta - 1 / k) ** 2 / k**3
    reference = analytic_reinforce_moments(k, delta).mean
    return _moments(mean, second, reference, k, delta, "exact_formula", "hindsight")


def _coords(k: int, delta: int) -> tuple[int, int]:
    # (a, g) for the logit under study; any representative gives the same law by symmetry
    return (0, 0) if delta else (1, 0)


def reinforce_outcomes(k: int, delta: int) -> np.ndarray:
    """eta[a, g] for every equiprobable outcome (g', b), as a (k, k) array indexed [g', b]."""
    a, g = _coords(k, delta)
    gp = np.arange(k)[:, None]
    b = np.arange(k)[None, :]
    reward = (b == gp).astype(np.float64)
    score = (g == gp) * ((a == b) - 1.0 / k)
    return reward * score


def hindsight_outcomes(k: int, delta: int) -> np.ndarray:
    """eta_h[a, g] for each equiprobable on-policy action b, relabeled to g' = b."""
    a, g = _coords(k, delta)
    b = np.arange(k)
    gp = b
    reward = np.ones(k)
    score = (g == gp) * ((a == b) - 1.0 / k)
    return reward * score / k


def enumerate_reinforce(k: int, delta: int) -> EstimatorMoments:
    _check(k, delta)
    if k > ENUMERATION_CAP:
        raise InputError(f"enumeration is capped at k = {ENUMERATION_CAP}")
    vals = reinforce_outcomes(k, delta).ravel()
    mean = math.fsum(vals) / vals.size
    second = math.fsum(vals * vals) / vals.size
    return _moments(mean, second, mean, k, delta, "enumeration", "reinforce")


def enumerate_hindsight(k: int, delta: int) -> EstimatorMoments:
    _check(k, delta)
    if k > ENUMERATION_CAP:
        raise InputError(f"enumeration is capped at k = {ENUMERATION_CAP}")
    vals = hindsight_outcomes(k, delta)
    mean = math.fsum(vals) / k
    second = math.fsum(vals * vals) / k
    reference = enumerate_reinforce(k, delta).mean
    return _moments(mean, second, reference, k, delta, "enumeration", "hindsight")


def sample_estimator(estimator: str, k: int, delta: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. draws of the estimator by simulating goals and actions."""
    _check(k, delta)
    a, g = _coords(k, delta)
    if estimator == "reinforce":
        gp = rng.integers(k, size=n)
        b = rng.integers(k, size=n)  # pi(. | g') is uniform at initialization
        return (b == gp) * (g == gp) * ((a == b) - 1.0 / k)
    if estimator == "hindsight":
        b = rng.integers(k, size=n)
        return (g == b) * ((a == b) - 1.0 / k) / k
    raise InputError(f"unknown estimator {estimator!r}")


def monte_carlo_moments(
    estimator: str, k: int, delta: int, n_samples: int, rng: np.random.Generator
) -> EstimatorMoments:
    if n_samples < 1:
        raise InputError("n_samples must be >= 1")
    x = sample_estimator(estimator, k, delta, n_samples, rng)
    mean = float(x.mean())
    second = float((x * x).mean())
    reference = analytic_reinforce_moments(k, delta).mean
    return _moments(mean, second, reference, k, delta, f"monte_carlo({n_samples})", estimator)


@dataclass(frozen=True)
class ControlVariateResult:
    alpha_star: float
    rho_squared: float
    mean_y: float
    var_x: float
    var_y: float
    cov_xy: float


def control_variate_analysis(k: int, delta: int) -> ControlVariateResult:
    """Optimal score control variate for REINFORCE, by enumeration over (g', b).

    X = eta[a, g] and Y = dlog pi(b | g') / dL[a, g]; the variance of X - alpha Y
    is minimized at alpha* = Cov[X, Y] / V[Y], removing a fraction rho^2.
    """
    _check(k, delta)
    a, g = _coords(k, delta)
    gp = np.arange(k)[:, None]
    b = np.arange(k)[None, :]
    y = ((g == gp) * ((a == b) - 1.0 / k)).astype(np.float64)
    x = reinforce_outcomes(k, delta)
    n = k * k
    ex, ey = math.fsum(x.ravel()) / n, math.fsum(y.ravel()) / n
    vx = math.fsum(((x - ex) ** 2).ravel()) / n
    vy = math.fsum(((y - ey) ** 2).ravel()) / n
    cov = math.fsum(((x - ex) * (y - ey)).ravel()) / n
    return ControlVariateResult(cov / vy, cov * cov / (vx * vy), ey, vx, vy, cov)


def relative_error(estimator: str, k: int, delta: int = 1) -> float:
    if k > ENUMERATION_CAP:
        fn = analytic_reinforce_moments if estimator == "reinforce" else analytic_hindsight_moments
        return fn(k, delta).relative_error
    fn = enumerate_reinforce if estimator == "reinforce" else enumerate_hindsight
    return fn(k, delta).relative_error


def scaling_experiment(ks, estimator: str) -> tuple[list[tuple[int, float]], float]:
    """Relative error (delta = 1) per k and the least-squares log-log slope."""
    ks = list(ks)
    if any(k < 2 for k in ks):
        raise InputError("all k must be >= 2")
    table = [(k, relative_error(estimator, k, 1)) for k in ks]
    x = np.log([k for k, _ in table])
    y = np.log([e for _, e in table])
    slope = float(np.polyfit(x, y, 1)[0]) if len(ks) > 1 else float("nan")
    return table, slope


def lab_table(ks) -> list[EstimatorMoments]:
    rows = []
    for k in ks:
        for delta in (1, 0):
            if k <= ENUMERATION_CAP:
                rows.append(enumerate_reinforce(k, delta))
                rows.append(enumerate_hindsight(k, delta))
            else:
                rows.append(analytic_reinforce_moments(k, delta))
                rows.append(analytic_hindsight_moments(k, delta))
    return rows


# Tabular hEM on the one-step MDP: exact M-step and the support lower bound.


def one_step_return(probs: np.ndarray) -> float:
    """Exact J = (1/k) sum_g pi(a = g | g) for a column-stochastic table probs[a, g]."""
    probs = np.asarray(probs, dtype=np.float64)
    return float(np.trace(probs) / probs.shape[1])


def relabel_one_step(actions) -> np.ndarray:
    """Hindsight goals for one-step samples: the only rewarding goal for action b is b."""
    return np.asarray(actions, dtype=np.int64).reshape(-1)


def closed_form_m_step(probs: np.ndarray, actions) -> np.ndarray:
    """argmax of sum log pi(b | g') over the relabeled buffer, per goal column.

    Columns of goals seen in the buffer become the empirical action law for
    that goal; unseen columns keep their previous values.
    """
    probs = np.array(probs, dtype=np.float64)
    b = np.asarray(actions, dtype=np.int64).reshape(-1)
    goals = relabel_one_step(b)
    k = probs.shape[1]
    counts = np.zeros((probs.shape[0], k))
    np.add.at(counts, (b, goals), 1.0)
    seen = counts.sum(axis=0) > 0
    probs[:, seen] = counts[:, seen] / counts[:, seen].sum(axis=0)
    return probs


def support_bound(actions, k: int) -> float:
    """|supp p~(g)| / |G| for the relabeled buffer."""
    return len(np.unique(relabel_one_step(actions))) / k


def sample_one_step(probs: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """n episodes: g ~ U(G), b ~ probs[:, g]."""
    probs = np.asarray(probs, dtype=np.float64)
    goals = rng.integers(probs.shape[1], size=n)
    u = rng.random(n)
    cdf = probs[:, goals].cumsum(axis=0)
    return np.minimum((cdf < u).sum(axis=0), probs.shape[0] - 1)


@dataclass
class BoundTrace:
    k: int
    returns: list[float]
    bounds: list[float]

    @property
    def violations(self) -> int:
        return sum(j < b - 1e-12 for j, b in zip(self.returns, self.bounds))

    @property
    def bound_monotone(self) -> bool:
        return all(b1 >= b0 for b0, b1 in zip(self.bounds, self.bounds[1:]))


def tabular_bound_trace(k: int, rounds: int, rng: np.random.Generator, max_batch: int = 8) -> BoundTrace:
    """Grow a buffer from a random initial policy, doing a full M-step after each batch."""
    probs = rng.dirichlet(np.ones(k), size=k).T
    buffer = np.zeros(0, dtype=np.int64)
    returns, bounds = [], []
    for _ in range(rounds):
        batch = sample_one_step(probs, int(rng.integers(1, max_batch + 1)), rng)
        buffer = np.concatenate([buffer, batch])
        probs = closed_form_m_step(probs, buffer)
        returns.append(one_step_return(probs))
        bounds.append(support_bound(buffer, k))
    return BoundTrace(k, returns, bounds)
