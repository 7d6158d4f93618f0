"""Tabular option-value critic and its TD errors.

The critic keeps one table ``q_omega[s, o]`` learned by intra-option
Q-learning. State values, arrival values and both TD errors are derived
from it:

    v(s)        value of drawing a fresh option at s (expectation under the
                policy over options, or max over options)
    u(o, s')    value of arriving at s' with o still nominally active:
                (1 - beta) q(s', o) + beta v(s')
    delta_u     r + gamma u(o, s') - q(s, o)        (policy TD error)
    delta_omega r + gamma v(s') - v(s)              (termination TD error)

``delta_omega`` has a second form with gamma multiplying both value terms;
which one a run uses is a config choice (see ``agent``). Terminal next
states bootstrap to zero in both TD errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .options import FeatureMap, OptionParams, PolicyOverOptionsTable, termination_prob

VALUE_STYLES = ("epsilon_greedy_expectation", "max")
DELTA_OMEGA_FORMS = ("text", "line12")


@dataclass
class CriticTables:
    q_omega: np.ndarray  # (num_states, num_options)
    learning_rate: float = 0.5
    value_style: str = "epsilon_greedy_expectation"

    def __post_init__(self):
        self.q_omega = np.asarray(self.q_omega, dtype=float)
        if self.value_style not in VALUE_STYLES:
            raise ValueError(f"value_style must be one of {VALUE_STYLES}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")

    def copy(self) -> "CriticTables":
        return CriticTables(self.q_omega.copy(), self.learning_rate, self.value_style)


def zero_critic(num_states, num_options, learning_rate=0.5,
                value_style="epsilon_greedy_expectation"):
    return CriticTables(np.zeros((num_states, num_options)), learning_rate, value_style)


def v_of(critic: CriticTables, pi_over: PolicyOverOptionsTable, s: int) -> float:
    if critic.value_style == "max":
        return float(np.max(critic.q_omega[s]))
    return float(pi_over.probs[s] @ critic.q_omega[s])


def u_of(critic, params: OptionParams, fmap: FeatureMap, pi_over, o: int, s_next: int) -> float:
    "Arrival value: (1 - beta_o(s')) q(s', o) + beta_o(s') v(s')."
    b = termination_prob(params, fmap, o, s_next)
    return (1.0 - b) * float(critic.q_omega[s_next, o]) + b * v_of(critic, pi_over, s_next)


def td_error_u(critic, params, fmap, pi_over, s, o, r, s_next, terminal: bool,
               gamma: float) -> float:
    "Policy TD error: r + gamma u(o, s') - q(s, o)."
    boot = 0.0 if terminal else u_of(critic, params, fmap, pi_over, o, s_next)
    return r + gamma * boot - float(critic.q_omega[s, o])


def td_error_omega(critic, pi_over, s, r, s_next, terminal: bool, gamma: float,
                   form: str = "text") -> float:
    """Termination TD error.

    form="text"   : r + gamma v(s') - v(s)
    form="line12" : r + gamma v(s') - gamma v(s)
    """
    if form not in DELTA_OMEGA_FORMS:
        raise ValueError(f"unknown delta-omega form {form!r}")
    boot = 0.0 if terminal else v_of(critic, pi_over, s_next)
    vs = v_of(critic, pi_over, s)
    if form == "line12":
        return r + gamma * boot - gamma * vs
    return r + gamma * boot - vs


def q_learning_update(critic, params, fmap, pi_over, s, o, r, s_next, terminal: bool,
                      gamma: float) -> float:
    """One intra-option Q-learning step on entry (s, o); returns the TD error used.

    Only q_omega[s, o] changes. The bootstrap honors the critic's value_style
    through v_of inside the arrival value.
    """
    delta = td_error_u(critic, params, fmap, pi_over, s, o, r, s_next, terminal, gamma)
    critic.q_omega[s, o] += critic.learning_rate * delta
    return delta
