"""hEM and the baselines it is compared against."""

from .dqn_her import DqnConfig, DqnHerTrainer, QNetwork, dqn_her_update
from .hem import HemConfig, HemTrainer, hem_iteration, m_step_gradient, m_step_objective
from .policy_gradient import PgConfig, PolicyGradientTrainer, hpg_update, reinforce_update

__all__ = [
    "DqnConfig", "DqnHerTrainer", "QNetwork", "dqn_her_update",
    "HemConfig", "HemTrainer", "hem_iteration", "m_step_gradient", "m_step_objective",
    "PgConfig", "PolicyGradientTrainer", "hpg_update", "reinforce_update",
]
