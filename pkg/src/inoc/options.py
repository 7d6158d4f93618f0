"""Parameterized options: linear-softmax policies and linear-sigmoid terminations.

Each option ``o`` owns a policy weight block ``theta[o]`` of shape
``(feature_dim, num_actions)`` and a termination weight vector
``vartheta[o]`` of shape ``(feature_dim,)``. Gradients of the log
probabilities are returned as vectors over the *stacked* parameters
(C-order flatten of the theta / vartheta arrays); coordinates belonging
to other options are structurally zero.

Termination probabilities are clamped away from {0, 1} before they are
used as probabilities or in likelihood ratios, so the ratio
``beta' / (1 - beta')`` stays finite. Gradients always come from the
unclamped sigmoid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class DegenerateLikelihood(Exception):
    """Continuation probability so close to 1 that its odds ratio blows up."""


@dataclass(frozen=True)
class FeatureMap:
    """State feature function ``s -> R^dimension``."""

    dimension: int
    evaluate: Callable[[int], np.ndarray]
    one_hot: bool = False


def one_hot_features(num_states: int) -> FeatureMap:
    "Tabular features: evaluate(s) is the s-th standard basis vector."
    eye = np.eye(num_states)
    return FeatureMap(dimension=num_states, evaluate=lambda s: eye[s], one_hot=True)


@dataclass
class OptionParams:
    num_options: int
    theta: np.ndarray     # (num_options, feature_dim, num_actions)
    vartheta: np.ndarray  # (num_options, feature_dim)
    epsilon_over_options: float = 0.05
    beta_clamp: float = 1e-6

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.vartheta = np.asarray(self.vartheta, dtype=float)
        if self.theta.shape[0] != self.num_options or self.vartheta.shape[0] != self.num_options:
            raise ValueError("leading dimension of theta/vartheta must be num_options")
        if self.theta.shape[1] != self.vartheta.shape[1]:
            raise ValueError("theta and vartheta disagree on feature_dim")
        if not (0.0 < self.beta_clamp < 0.5):
            raise ValueError("beta_clamp must lie in (0, 0.5)")

    @property
    def feature_dim(self):
        return self.theta.shape[1]

    @property
    def num_actions(self):
        return self.theta.shape[2]

    @property
    def theta_size(self):
        return self.theta.size

    @property
    def vartheta_size(self):
        return self.vartheta.size

    def copy(self) -> "OptionParams":
        return OptionParams(
            num_options=self.num_options,
            theta=self.theta.copy(),
            vartheta=self.vartheta.copy(),
            epsilon_over_options=self.epsilon_over_options,
            beta_clamp=self.beta_clamp,
        )


def zero_params(num_options, feature_dim, num_actions, epsilon=0.05, beta_clamp=1e-6):
    return OptionParams(
        num_options=num_options,
        theta=np.zeros((num_options, feature_dim, num_actions)),
        vartheta=np.zeros((num_options, feature_dim)),
        epsilon_over_options=epsilon,
        beta_clamp=beta_clamp,
    )


@dataclass(frozen=True)
class PolicyOverOptionsTable:
    """Explicit (frozen) policy over options; rows are distributions."""

    probs: np.ndarray  # (num_states, num_options)

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=float))
        rows = self.probs.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-12) or np.any(self.probs < 0):
            raise ValueError("policy-over-options rows must be distributions")


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


def intra_option_probs(params: OptionParams, fmap: FeatureMap, o: int, s: int) -> np.ndarray:
    "Action distribution of option o at state s: softmax(features . theta[o])."
    x = fmap.evaluate(s)
    return softmax(x @ params.theta[o])


def grad_log_intra_option(params, fmap, o, s, a) -> np.ndarray:
    """d ln pi_o(s, a) / d theta over the stacked theta vector.

    For softmax logits z = x.theta[o] the block gradient is the outer
    product x (e_a - pi)^T; all other option blocks are zero.
    """
    x = fmap.evaluate(s)
    pi = softmax(x @ params.theta[o])
    local = -pi
    local[a] += 1.0
    g = np.zeros_like(params.theta)
    g[o] = np.outer(x, local)
    return g.reshape(-1)


def termination_prob(params, fmap, o, s) -> float:
    "Clamped sigmoid(features . vartheta[o])."
    z = float(fmap.evaluate(s) @ params.vartheta[o])
    c = params.beta_clamp
    return min(max(sigmoid(z), c), 1.0 - c)


def grad_log_termination(params, fmap, o, s) -> np.ndarray:
    "d ln beta_o(s) / d vartheta, stacked; (1 - sigmoid) * features on block o."
    x = fmap.evaluate(s)
    z = float(x @ params.vartheta[o])
    g = np.zeros_like(params.vartheta)
    g[o] = (1.0 - sigmoid(z)) * x
    return g.reshape(-1)


def continuation_prob(params, fmap, pi_over: PolicyOverOptionsTable, o, s_next) -> float:
    """Probability that option o is still the active option when leaving s_next.

    beta' = 1 - beta + beta * pi_over(s_next, o): either the option did not
    terminate, or it terminated and was immediately re-selected.
    """
    b = termination_prob(params, fmap, o, s_next)
    return 1.0 - b + b * float(pi_over.probs[s_next, o])


def grad_log_continuation(params, fmap, pi_over, o, s_next) -> np.ndarray:
    """d ln beta' / d vartheta, stacked.

    Since beta' = 1 - (1 - pi_over) beta, the block gradient is
    (pi_over - 1) * dbeta / beta' with dbeta from the unclamped sigmoid.
    """
    x = fmap.evaluate(s_next)
    z = float(x @ params.vartheta[o])
    b_raw = sigmoid(z)
    b = termination_prob(params, fmap, o, s_next)
    p = float(pi_over.probs[s_next, o])
    g = np.zeros_like(params.vartheta)
    if p == 1.0:
        # beta' is identically 1: the gradient of a constant, not a degeneracy
        return g.reshape(-1)
    b_cont = 1.0 - b + b * p
    if 1.0 - b_cont < 1e-12:
        raise DegenerateLikelihood(
            f"1 - beta'({s_next}, option {o}) = {1.0 - b_cont!r}; odds ratio undefined"
        )
    g[o] = (p - 1.0) * b_raw * (1.0 - b_raw) * x / b_cont
    return g.reshape(-1)


def likelihood_ratio(params, fmap, pi_over, o, s_next) -> float:
    "Odds beta' / (1 - beta') of the option staying active across s_next."
    b_cont = continuation_prob(params, fmap, pi_over, o, s_next)
    if 1.0 - b_cont < 1e-12:
        raise DegenerateLikelihood(f"1 - beta'({s_next}, option {o}) = {1.0 - b_cont!r}")
    return b_cont / (1.0 - b_cont)


def select_option(q_omega: np.ndarray, s: int, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy draw over options at state s (ties to the lowest index).

    Consumes one uniform for the explore test and, when exploring, a second
    one mapped to a uniform option index.
    """
    num_options = q_omega.shape[1]
    if rng.random() < epsilon:
        return min(int(rng.random() * num_options), num_options - 1)
    return int(np.argmax(q_omega[s]))


def explicit_policy_over_options(q_omega: np.ndarray, epsilon: float) -> PolicyOverOptionsTable:
    "The epsilon-greedy selection rule written out as an explicit table."
    S, O = q_omega.shape
    probs = np.full((S, O), epsilon / O)
    greedy = np.argmax(q_omega, axis=1)
    probs[np.arange(S), greedy] += 1.0 - epsilon
    return PolicyOverOptionsTable(probs=probs)
