"""Hindsight expectation maximization for goal-conditioned RL, with an estimator lab."""

__version__ = "0.1.0"
