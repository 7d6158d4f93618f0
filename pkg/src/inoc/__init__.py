"""Tabular option-critic agents with natural-gradient updates, plus an exact
verification oracle for the underlying gradient and information-matrix
identities."""

from .agent import AgentMode, EpisodeRecord, NaturalGradientState, fresh_state, run_episode
from .critic import CriticTables, q_learning_update, td_error_omega, td_error_u, u_of, v_of
from .mdp import TabularMdp, sample_initial, sample_transition, validate
from .options import (
    FeatureMap,
    OptionParams,
    PolicyOverOptionsTable,
    explicit_policy_over_options,
    one_hot_features,
)

__version__ = "0.1.0"

__all__ = [
    "AgentMode",
    "CriticTables",
    "EpisodeRecord",
    "FeatureMap",
    "NaturalGradientState",
    "OptionParams",
    "PolicyOverOptionsTable",
    "TabularMdp",
    "explicit_policy_over_options",
    "fresh_state",
    "one_hot_features",
    "q_learning_update",
    "run_episode",
    "sample_initial",
    "sample_transition",
    "td_error_omega",
    "td_error_u",
    "u_of",
    "v_of",
    "validate",
]
