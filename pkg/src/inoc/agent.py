"""Actor updates and the episode loop.

Three actor modes share one critic and one episode loop:

* ``INOC``: incremental natural updates. Per step the policy-coefficient
  vector eta follows a TD-weighted eligibility trace plus a rank-1
  correction built from the policy score, and theta moves a fixed
  step-length alpha_theta along eta / ||eta||. When the active option is
  unchanged from the previous step, the termination-coefficient vector phi
  gets the analogous update from the termination score and vartheta moves
  against phi / ||phi||.
* ``INOC_DERIVED``: identical except the rank-1 correction for phi pairs
  the termination score with the continuation score, the pairing the
  squared-error gradient of the continued-option fit actually produces.
* ``VANILLA``: plain stochastic-gradient option critic; theta follows
  delta_u times the policy score, vartheta descends the termination
  gradient weighted by the option advantage at the next state.

All rank-1 corrections are applied as two vector operations (a dot product
and an axpy); no step ever materializes a parameter-by-parameter matrix,
so per-step time and space stay linear in the parameter count.

Coefficients and traces reset to zero whenever the active option
terminates, and at episode end (episode boundaries break the path the
traces integrate over).
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .critic import CriticTables, q_learning_update, td_error_omega, td_error_u, v_of
from .mdp import TabularMdp, sample_from
from .options import (
    FeatureMap,
    OptionParams,
    explicit_policy_over_options,
    grad_log_continuation,
    grad_log_intra_option,
    grad_log_termination,
    intra_option_probs,
    select_option,
    sigmoid,
    termination_prob,
)

NORM_GUARD = 1e-12


class AgentMode(enum.Enum):
    INOC = "inoc"
    INOC_DERIVED = "inoc_derived"
    VANILLA = "vanilla"


@dataclass
class NaturalGradientState:
    """Coefficient vectors, traces, and step sizes for one agent."""

    eta: np.ndarray
    phi: np.ndarray
    trace_eta: np.ndarray
    trace_phi: np.ndarray
    lam: float
    alpha_eta: float
    alpha_phi: float
    alpha_theta: float
    alpha_vartheta: float

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0):
            raise ValueError("lambda must lie in [0, 1]")
        for name in ("alpha_eta", "alpha_phi", "alpha_theta", "alpha_vartheta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def fresh_state(params: OptionParams, lam, alpha_eta, alpha_phi, alpha_theta,
                alpha_vartheta) -> NaturalGradientState:
    return NaturalGradientState(
        eta=np.zeros(params.theta_size),
        phi=np.zeros(params.vartheta_size),
        trace_eta=np.zeros(params.theta_size),
        trace_phi=np.zeros(params.vartheta_size),
        lam=lam,
        alpha_eta=alpha_eta,
        alpha_phi=alpha_phi,
        alpha_theta=alpha_theta,
        alpha_vartheta=alpha_vartheta,
    )


def on_option_termination(state: NaturalGradientState) -> None:
    "Zero the coefficient vectors and traces; parameters and critic are untouched."
    state.eta[:] = 0.0
    state.phi[:] = 0.0
    state.trace_eta[:] = 0.0
    state.trace_phi[:] = 0.0


@dataclass(frozen=True)
class Transition:
    s: int
    o: int
    a: int
    reward: float
    s_next: int
    terminal: bool
    o_prev: int | None  # active option of the previous step; None at t=0


@dataclass
class EpisodeRecord:
    episode_index: int
    return_disc: float
    return_undisc: float
    steps: int
    term_update_fraction: float
    wall_time: float
    truncated: bool = False


class StepLimitExceeded(Exception):
    """Episode hit the step cap (recorded on the episode, never raised by run_episode)."""


def inoc_step(state: NaturalGradientState, critic: CriticTables, params: OptionParams,
              fmap: FeatureMap, rec: Transition, gamma: float,
              derived_correction: bool = False, delta_omega_form: str = "text") -> None:
    """One incremental natural update from a single transition.

    Follows the per-step recipe in order: trace then coefficient then
    parameter for theta; the same for vartheta guarded on the active option
    being unchanged. ``derived_correction`` switches the phi rank-1 term's
    second factor from the termination score to the continuation score.
    """
    pi_over = explicit_policy_over_options(critic.q_omega, params.epsilon_over_options)
    g = grad_log_intra_option(params, fmap, rec.o, rec.s, rec.a)
    state.trace_eta *= state.lam
    state.trace_eta += g
    delta_u = td_error_u(critic, params, fmap, pi_over, rec.s, rec.o, rec.reward,
                         rec.s_next, rec.terminal, gamma)
    # both increment terms read the pre-update eta (single assignment)
    g_dot_eta = float(g @ state.eta)
    state.eta += state.alpha_eta * delta_u * state.trace_eta
    state.eta -= state.alpha_eta * g_dot_eta * g
    norm = float(np.linalg.norm(state.eta))
    if norm >= NORM_GUARD:
        params.theta += (state.alpha_theta / norm) * state.eta.reshape(params.theta.shape)

    if rec.o_prev is None or rec.o != rec.o_prev:
        return
    h = grad_log_termination(params, fmap, rec.o, rec.s)
    state.trace_phi *= state.lam
    state.trace_phi += h
    delta_om = td_error_omega(critic, pi_over, rec.s, rec.reward, rec.s_next,
                              rec.terminal, gamma, form=delta_omega_form)
    beta_here = termination_prob(params, fmap, rec.o, rec.s)
    h2 = grad_log_continuation(params, fmap, pi_over, rec.o, rec.s) if derived_correction else h
    h2_dot_phi = float(h2 @ state.phi)
    state.phi += state.alpha_phi * beta_here * delta_om * state.trace_phi
    state.phi += state.alpha_phi * h2_dot_phi * h
    norm = float(np.linalg.norm(state.phi))
    if norm >= NORM_GUARD:
        params.vartheta -= (state.alpha_vartheta / norm) * state.phi.reshape(params.vartheta.shape)


def vanilla_oc_step(state: NaturalGradientState, critic: CriticTables, params: OptionParams,
                    fmap: FeatureMap, rec: Transition, gamma: float) -> None:
    """Plain stochastic option-critic actor update from one transition."""
    pi_over = explicit_policy_over_options(critic.q_omega, params.epsilon_over_options)
    delta_u = td_error_u(critic, params, fmap, pi_over, rec.s, rec.o, rec.reward,
                         rec.s_next, rec.terminal, gamma)
    g = grad_log_intra_option(params, fmap, rec.o, rec.s, rec.a)
    params.theta += state.alpha_theta * delta_u * g.reshape(params.theta.shape)
    # termination improvement at the arrival state; unclamped sigmoid gradient
    x = fmap.evaluate(rec.s_next)
    z = float(x @ params.vartheta[rec.o])
    b_raw = sigmoid(z)
    adv = float(critic.q_omega[rec.s_next, rec.o]) - v_of(critic, pi_over, rec.s_next)
    params.vartheta[rec.o] -= state.alpha_vartheta * b_raw * (1.0 - b_raw) * adv * x


def run_episode(mode: AgentMode, mdp: TabularMdp, params: OptionParams,
                critic: CriticTables, state: NaturalGradientState, fmap: FeatureMap,
                rng: np.random.Generator, episode_index: int = 0,
                max_steps: int | None = None, delta_omega_form: str = "text",
                learn: bool = True) -> EpisodeRecord:
    """Simulate one episode, learning critic and actor in place.

    Random draws happen in a fixed order (initial state; option selection;
    then per step: action, next state, and -- only if the episode continues
    -- the termination test and any re-selection), so a seeded generator
    reproduces a run exactly. Step-cap truncation is recorded but does not
    change bootstrapping.
    """
    t0 = time.perf_counter()
    gamma = mdp.gamma
    cap = max_steps if max_steps is not None else mdp.max_episode_steps
    s = sample_from(mdp.initial_dist, rng.random())
    ret_disc, ret_undisc, discount = 0.0, 0.0, 1.0
    steps, guard_true = 0, 0
    truncated = False
    if not mdp.terminal[s]:
        o = select_option(critic.q_omega, s, params.epsilon_over_options, rng)
        o_prev: int | None = None
        while True:
            pi = intra_option_probs(params, fmap, o, s)
            a = sample_from(pi, rng.random())
            s_next = sample_from(mdp.transition[s, a], rng.random())
            r = float(mdp.reward[s, a, s_next])
            terminal = bool(mdp.terminal[s_next])
            rec = Transition(s, o, a, r, s_next, terminal, o_prev)
            if o_prev is not None and o == o_prev:
                guard_true += 1
            if learn:
                if mode is AgentMode.VANILLA:
                    vanilla_oc_step(state, critic, params, fmap, rec, gamma)
                else:
                    inoc_step(state, critic, params, fmap, rec, gamma,
                              derived_correction=(mode is AgentMode.INOC_DERIVED),
                              delta_omega_form=delta_omega_form)
                pi_over = explicit_policy_over_options(critic.q_omega,
                                                       params.epsilon_over_options)
                q_learning_update(critic, params, fmap, pi_over, s, o, r, s_next,
                                  terminal, gamma)
            ret_disc += discount * r
            ret_undisc += r
            discount *= gamma
            steps += 1
            o_prev = o
            if terminal:
                break
            if cap is not None and steps >= cap:
                truncated = True
                break
            if rng.random() < termination_prob(params, fmap, o, s_next):
                on_option_termination(state)
                o = select_option(critic.q_omega, s_next, params.epsilon_over_options, rng)
            s = s_next
    on_option_termination(state)
    frac = guard_true / steps if steps else 0.0
    return EpisodeRecord(
        episode_index=episode_index,
        return_disc=ret_disc,
        return_undisc=ret_undisc,
        steps=steps,
        term_update_fraction=frac,
        wall_time=time.perf_counter() - t0,
        truncated=truncated,
    )
