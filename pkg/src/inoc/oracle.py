"""Exact brute-force computations on small option MDPs.

Everything here works on the augmented Markov chain over state-option
pairs induced by frozen intra-option policies, terminations, and an
explicit (frozen) policy over options. Pairs are indexed ``s * O + o``.

Two half-step kernels generate everything:

    F[(s,o),(s',o)]  = sum_a pi_o(s,a) P(s,a,s')     state advances, option kept
    B[(s,o),(s,o')]  = (1-beta_o(s)) 1[o'=o] + beta_o(s) pi_over(s,o')

The full step is ``K = F B`` (law of (S_t, O_t) to (S_t+1, O_t+1)); the
shifted chain over arrival pairs (S_t+1, O_t) steps by ``K' = B F``.
Discounted weightings solve ``mu' (I - gamma K) = start'`` and likewise
for the shifted chain. Monte-Carlo estimators sample the equivalent
undiscounted process that resets to the start distribution with
probability 1 - gamma each step; its per-step pair marginal converges to
the normalized discounted weighting, which is what makes the 1/T-scaled
path information matrices converge to the analytic ones.

Instances are capped at 500 state-option pairs; dense factorizations only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import TabularMdp
from .options import (
    FeatureMap,
    OptionParams,
    PolicyOverOptionsTable,
    grad_log_continuation,
    grad_log_intra_option,
    grad_log_termination,
    intra_option_probs,
    sigmoid,
    termination_prob,
)

PAIR_CAP = 500


class SingularSystem(Exception):
    """The discounted linear system has no unique solution."""


class InstanceTooLarge(Exception):
    """More state-option pairs than the dense oracle supports."""


class DegenerateLikelihood(Exception):
    """A continuation probability reaches 1 on a weighted pair."""


def pair_index(s, o, num_options):
    return s * num_options + o


@dataclass(frozen=True)
class AugmentedChain:
    """State-option pair chain for one frozen policy configuration."""

    kernel: np.ndarray        # (SO, SO)  full step F B
    state_step: np.ndarray    # (SO, SO)  half step F
    option_switch: np.ndarray  # (SO, SO)  half step B
    start: np.ndarray         # (SO,)
    num_states: int
    num_options: int

    @property
    def shifted_kernel(self):
        return self.option_switch @ self.state_step


@dataclass(frozen=True)
class ExactSolution:
    """All exact tables for one configuration, indexed [s, o] / [s, o, a]."""

    mu: np.ndarray                 # (S, O) discounted weighting of (S_t, O_t)
    mu_shifted: np.ndarray         # (S, O) weighting of (S_t+1, O_t), same run
    q_u: np.ndarray                # (S, O, A)
    q_omega: np.ndarray            # (S, O)
    v: np.ndarray                  # (S,)
    u: np.ndarray                  # (S, O) arrival value u(o, s) stored [s, o]
    a_u: np.ndarray                # (S, O, A) q_u - q_omega
    a_omega: np.ndarray            # (S, O)    q_omega - v
    a_omega_continued: np.ndarray  # (S, O)    u - q_omega = -beta a_omega
    j_value: float                 # start-weighted expected discounted return


def policy_tables(mdp: TabularMdp, params: OptionParams, fmap: FeatureMap):
    """Dense tables pi[s,o,a], clamped beta[s,o], raw-sigmoid beta_raw[s,o]."""
    S, O, A = mdp.num_states, params.num_options, params.num_actions
    pi = np.empty((S, O, A))
    beta = np.empty((S, O))
    beta_raw = np.empty((S, O))
    for s in range(S):
        x = fmap.evaluate(s)
        for o in range(O):
            pi[s, o] = intra_option_probs(params, fmap, o, s)
            beta_raw[s, o] = sigmoid(float(x @ params.vartheta[o]))
            beta[s, o] = termination_prob(params, fmap, o, s)
    return pi, beta, beta_raw


def start_vector(mdp, params, pi_over, start):
    """Normalize the start argument to a distribution over pairs.

    None        -> d0(s) * pi_over(s, o)
    (s, o)      -> point mass
    array       -> as given ((S*O,) or (S, O))
    """
    S, O = mdp.num_states, params.num_options
    if start is None:
        vec = (mdp.initial_dist[:, None] * pi_over.probs).reshape(-1)
    elif isinstance(start, tuple):
        vec = np.zeros(S * O)
        vec[pair_index(start[0], start[1], O)] = 1.0
    else:
        vec = np.asarray(start, dtype=float).reshape(-1)
        if vec.shape != (S * O,):
            raise ValueError("start vector has wrong length")
    return vec


def build_chain(mdp, params, fmap, pi_over: PolicyOverOptionsTable, start=None) -> AugmentedChain:
    S, O = mdp.num_states, params.num_options
    if S * O > PAIR_CAP:
        raise InstanceTooLarge(f"{S * O} state-option pairs exceeds the cap of {PAIR_CAP}")
    pi, beta, _ = policy_tables(mdp, params, fmap)
    n = S * O
    # F: (s,o) -> (s',o) with s' ~ sum_a pi_o(a|s) P(s,a,.)
    state_marg = np.einsum("soa,sap->sop", pi, mdp.transition)  # (S, O, S)
    F = np.zeros((n, n))
    for o in range(O):
        F[o::O, o::O] = state_marg[:, o, :]
    # B: option switch at a fixed state
    B = np.zeros((n, n))
    for s in range(S):
        blk = beta[s][:, None] * pi_over.probs[s][None, :]
        blk[np.diag_indices(O)] += 1.0 - beta[s]
        B[s * O:(s + 1) * O, s * O:(s + 1) * O] = blk
    return AugmentedChain(
        kernel=F @ B,
        state_step=F,
        option_switch=B,
        start=start_vector(mdp, params, pi_over, start),
        num_states=S,
        num_options=O,
    )


def _discounted_solve(kernel, start, gamma, terminal_pairs):
    """x with x^T (I - gamma kernel) = start^T; gamma=1 drops absorbing pairs."""
    n = kernel.shape[0]
    if gamma < 1.0:
        A = np.eye(n) - gamma * kernel
        try:
            return np.linalg.solve(A.T, start)
        except np.linalg.LinAlgError as e:
            raise SingularSystem(str(e)) from None
    keep = ~terminal_pairs
    A = np.eye(int(keep.sum())) - kernel[np.ix_(keep, keep)]
    try:
        part = np.linalg.solve(A.T, start[keep])
    except np.linalg.LinAlgError as e:
        raise SingularSystem(str(e)) from None
    out = np.zeros(n)
    out[keep] = part
    return out


def _terminal_pair_mask(mdp, num_options):
    return np.repeat(mdp.terminal, num_options)


def exact_mu(chain: AugmentedChain, gamma: float, mdp: TabularMdp | None = None):
    """Discounted pair weightings (mu, mu_shifted) for the chain's start.

    mu(s,o) sums gamma^t Pr(S_t=s, O_t=o); the shifted weighting pairs the
    arrival state with the incumbent option and is one state half-step away:
    mu_shifted = mu F. With gamma=1 the weights of absorbing terminal pairs
    are reported as zero (they never enter any gradient or metric, every
    integrand vanishing on them).
    """
    terminal = np.zeros(chain.kernel.shape[0], dtype=bool)
    if mdp is not None:
        terminal = _terminal_pair_mask(mdp, chain.num_options)
    mu = _discounted_solve(chain.kernel, chain.start, gamma, terminal)
    return mu, mu @ chain.state_step


def shifted_mu(chain: AugmentedChain, gamma: float, start, mdp: TabularMdp | None = None):
    """Discounted weighting of arrival pairs (S_t+1, O_t) from its own start.

    ``start`` is a pair (arrival_state, incumbent_option) or a distribution
    over pairs; the chain steps by B then F.
    """
    if isinstance(start, tuple):
        vec = np.zeros(chain.kernel.shape[0])
        vec[pair_index(start[0], start[1], chain.num_options)] = 1.0
    else:
        vec = np.asarray(start, dtype=float).reshape(-1)
    terminal = np.zeros(chain.kernel.shape[0], dtype=bool)
    if mdp is not None:
        terminal = _terminal_pair_mask(mdp, chain.num_options)
    return _discounted_solve(chain.shifted_kernel, vec, gamma, terminal)


def exact_values(mdp, params, fmap, pi_over, gamma=None, start=None) -> ExactSolution:
    """Solve the value tables and weightings exactly.

    q solves (I - gamma F B) q = rbar with rbar the expected one-step reward
    of each pair; v, u, q_u, and the advantages follow from the definitions.
    """
    if gamma is None:
        gamma = mdp.gamma
    chain = build_chain(mdp, params, fmap, pi_over, start=start)
    S, O, A = mdp.num_states, params.num_options, params.num_actions
    pi, beta, _ = policy_tables(mdp, params, fmap)
    rbar = np.einsum("soa,sap,sap->so", pi, mdp.transition, mdp.reward).reshape(-1)
    terminal = _terminal_pair_mask(mdp, O)
    n = S * O
    if gamma < 1.0:
        Aq = np.eye(n) - gamma * chain.kernel
        try:
            q_flat = np.linalg.solve(Aq, rbar)
        except np.linalg.LinAlgError as e:
            raise SingularSystem(str(e)) from None
    else:
        keep = ~terminal
        Aq = np.eye(int(keep.sum())) - chain.kernel[np.ix_(keep, keep)]
        try:
            part = np.linalg.solve(Aq, rbar[keep])
        except np.linalg.LinAlgError as e:
            raise SingularSystem(str(e)) from None
        q_flat = np.zeros(n)
        q_flat[keep] = part
    q = q_flat.reshape(S, O)
    v = np.einsum("so,so->s", pi_over.probs, q)
    u = (1.0 - beta) * q + beta * v[:, None]
    q_u = np.einsum("sap,sap->sa", mdp.transition, mdp.reward)[:, None, :] + gamma * np.einsum(
        "sap,po->soa", mdp.transition, u
    )
    q_u[mdp.terminal] = 0.0
    mu, mu_shift = exact_mu(chain, gamma, mdp=mdp)
    return ExactSolution(
        mu=mu.reshape(S, O),
        mu_shifted=mu_shift.reshape(S, O),
        q_u=q_u,
        q_omega=q,
        v=v,
        u=u,
        a_u=q_u - q[:, :, None],
        a_omega=q - v[:, None],
        a_omega_continued=u - q,
        j_value=float(chain.start @ q_flat),
    )


# ---------------------------------------------------------------------------
# Score tables over the stacked parameter vectors.
# ---------------------------------------------------------------------------


def theta_score_table(mdp, params, fmap):
    "g[s, o, a, :] = d ln pi_o(s,a) / d theta (stacked)."
    S, O, A = mdp.num_states, params.num_options, params.num_actions
    g = np.zeros((S, O, A, params.theta_size))
    for s in range(S):
        for o in range(O):
            for a in range(A):
                g[s, o, a] = grad_log_intra_option(params, fmap, o, s, a)
    return g


def vartheta_score_tables(mdp, params, fmap, pi_over):
    """(d beta, d ln beta, d ln beta') over the stacked vartheta, all [s, o, :]."""
    S, O = mdp.num_states, params.num_options
    d = params.vartheta_size
    dbeta = np.zeros((S, O, d))
    dlnbeta = np.zeros((S, O, d))
    dlncont = np.zeros((S, O, d))
    _, beta, _ = policy_tables(mdp, params, fmap)
    for s in range(S):
        for o in range(O):
            dlnbeta[s, o] = grad_log_termination(params, fmap, o, s)
            dbeta[s, o] = beta[s, o] * dlnbeta[s, o]
            dlncont[s, o] = grad_log_continuation(params, fmap, pi_over, o, s)
    return dbeta, dlnbeta, dlncont


# ---------------------------------------------------------------------------
# Exact gradients of the start-conditioned objective.
# ---------------------------------------------------------------------------


def exact_policy_gradient(mdp, params, fmap, pi_over, start) -> np.ndarray:
    """sum_{s,o} mu(s,o) sum_a (d pi_o(s,a) / d theta) q_u(s,o,a), unnormalized mu."""
    sol = exact_values(mdp, params, fmap, pi_over, start=start)
    pi, _, _ = policy_tables(mdp, params, fmap)
    g = theta_score_table(mdp, params, fmap)
    return np.einsum("so,soa,soa,soad->d", sol.mu, pi, sol.q_u, g)


def exact_termination_gradient(mdp, params, fmap, pi_over, start) -> np.ndarray:
    """-sum_{s',o} mu_shifted(s',o) (d beta_o(s') / d vartheta) a_omega(s',o).

    ``start`` names the arrival pair (state entered, incumbent option); its
    weighting runs over the shifted chain and includes the start pair itself.
    """
    gamma = mdp.gamma
    chain = build_chain(mdp, params, fmap, pi_over)
    mu = shifted_mu(chain, gamma, start, mdp=mdp).reshape(mdp.num_states, params.num_options)
    sol = exact_values(mdp, params, fmap, pi_over)
    dbeta, _, _ = vartheta_score_tables(mdp, params, fmap, pi_over)
    return -np.einsum("so,sod,so->d", mu, dbeta, sol.a_omega)


def finite_diff_gradient(mdp, params, fmap, pi_over, wrt, start, step=1e-5) -> np.ndarray:
    """Central differences of the start-conditioned objective, coordinatewise.

    wrt="theta": objective is the start-weighted q over pairs.
    wrt="vartheta": objective is the arrival value u at the start pair
    (start-weighted over arrival pairs for distribution starts).
    """
    if step <= 0:
        raise ValueError("step must be positive")

    def objective(p):
        sol = exact_values(mdp, p, fmap, pi_over)
        if wrt == "theta":
            vec = start_vector(mdp, p, pi_over, start)
            return float(vec @ sol.q_omega.reshape(-1))
        if isinstance(start, tuple):
            s1, o0 = start
            return float(sol.u[s1, o0])
        vec = np.asarray(start, dtype=float).reshape(-1)
        return float(vec @ sol.u.reshape(-1))

    if wrt == "theta":
        base = params.theta
    elif wrt == "vartheta":
        base = params.vartheta
    else:
        raise ValueError("wrt must be 'theta' or 'vartheta'")
    flat = base.reshape(-1)
    out = np.empty(flat.shape[0])
    for i in range(flat.shape[0]):
        p_hi = params.copy()
        p_lo = params.copy()
        (p_hi.theta if wrt == "theta" else p_hi.vartheta).reshape(-1)[i] += step
        (p_lo.theta if wrt == "theta" else p_lo.vartheta).reshape(-1)[i] -= step
        out[i] = (objective(p_hi) - objective(p_lo)) / (2.0 * step)
    return out


# ---------------------------------------------------------------------------
# Fisher information matrices and compatible least squares.
# ---------------------------------------------------------------------------


def exact_fim_theta(mdp, params, fmap, pi_over, start=None, normalized=True) -> np.ndarray:
    """Information matrix of the intra-option policies under the pair weighting.

    sum_{s,o} mu(s,o) sum_a pi_o(s,a) g g^T with g the policy score; the
    default normalizes mu to a distribution, matching the 1/T-scaled path
    matrix limit.
    """
    if mdp.gamma >= 1.0:
        raise SingularSystem("information matrices require gamma < 1")
    chain = build_chain(mdp, params, fmap, pi_over, start=start)
    mu, _ = exact_mu(chain, mdp.gamma, mdp=mdp)
    if normalized:
        mu = mu / mu.sum()
    mu = mu.reshape(mdp.num_states, params.num_options)
    pi, _, _ = policy_tables(mdp, params, fmap)
    g = theta_score_table(mdp, params, fmap)
    return np.einsum("so,soa,soad,soae->de", mu, pi, g, g)


def exact_fim_vartheta(mdp, params, fmap, pi_over, start=None, normalized=True) -> np.ndarray:
    """Information matrix of the terminations over arrival pairs.

    -sum mu'(s',o) (d ln beta)(d ln beta')^T, equivalently
    sum mu' (1 - pi_over)/(beta beta') (d beta)(d beta)^T, so symmetric PSD.
    ``start`` is an arrival pair (or distribution); default draws the first
    arrival from the run started at d0 x pi_over.
    """
    if mdp.gamma >= 1.0:
        raise SingularSystem("information matrices require gamma < 1")
    chain = build_chain(mdp, params, fmap, pi_over)
    if start is None:
        start = chain.start @ chain.state_step
    mu = shifted_mu(chain, mdp.gamma, start, mdp=mdp)
    if normalized:
        mu = mu / mu.sum()
    mu = mu.reshape(mdp.num_states, params.num_options)
    _, dlnbeta, dlncont = vartheta_score_tables(mdp, params, fmap, pi_over)
    return -np.einsum("so,sod,soe->de", mu, dlnbeta, dlncont)


def eta_normal_equations(mdp, params, fmap, pi_over, start):
    """(G, b) of the weighted least squares for the policy-advantage fit.

    Weights are the unnormalized mu times pi; features the policy scores;
    targets the state-option-action advantages. G eta = b are the optimality
    conditions, and b equals the exact policy gradient.
    """
    sol = exact_values(mdp, params, fmap, pi_over, start=start)
    pi, _, _ = policy_tables(mdp, params, fmap)
    g = theta_score_table(mdp, params, fmap)
    w = sol.mu[:, :, None] * pi
    G = np.einsum("soa,soad,soae->de", w, g, g)
    b = np.einsum("soa,soa,soad->d", w, sol.a_u, g)
    return G, b


def least_squares_eta(mdp, params, fmap, pi_over, start) -> np.ndarray:
    "Minimum-norm minimizer of the policy-advantage squared error."
    G, b = eta_normal_equations(mdp, params, fmap, pi_over, start)
    sol, *_ = np.linalg.lstsq(G, b, rcond=None)
    return sol


def phi_normal_equations(mdp, params, fmap, pi_over, start):
    """(G, b) for the continued-option-advantage fit over arrival pairs.

    Weights are mu' times the continuation odds L = beta'/(1-beta');
    features d ln beta'; targets u - q = -beta a_omega. The Gram matrix
    equals the termination information matrix (unnormalized), and b equals
    minus the exact termination gradient.
    """
    gamma = mdp.gamma
    chain = build_chain(mdp, params, fmap, pi_over)
    mu = shifted_mu(chain, gamma, start, mdp=mdp).reshape(mdp.num_states, params.num_options)
    sol = exact_values(mdp, params, fmap, pi_over)
    _, beta, _ = policy_tables(mdp, params, fmap)
    bcont = 1.0 - beta + beta * pi_over.probs
    denom = 1.0 - bcont
    if np.any((mu > 0) & (denom < 1e-9)):
        raise DegenerateLikelihood("continuation probability reaches 1 on a weighted pair")
    L = np.where(denom > 0, bcont / np.maximum(denom, 1e-300), 0.0)
    _, _, dlncont = vartheta_score_tables(mdp, params, fmap, pi_over)
    w = mu * L
    G = np.einsum("so,sod,soe->de", w, dlncont, dlncont)
    b = np.einsum("so,so,sod->d", w, sol.a_omega_continued, dlncont)
    return G, b


def least_squares_phi(mdp, params, fmap, pi_over, start) -> np.ndarray:
    "Minimum-norm minimizer of the continued-option-advantage squared error."
    G, b = phi_normal_equations(mdp, params, fmap, pi_over, start)
    sol, *_ = np.linalg.lstsq(G, b, rcond=None)
    return sol


# ---------------------------------------------------------------------------
# Monte-Carlo path information matrices.
# ---------------------------------------------------------------------------


def mc_fim_estimate(mdp, params, fmap, pi_over, manifold, horizon, num_paths,
                    rng, start=None) -> np.ndarray:
    """(1/T) average over paths of the outer product of summed scores.

    Paths follow the reset process: with probability 1 - gamma a step
    teleports back to a fresh start draw instead of following the chain.
    manifold="theta" scores the action choices; manifold="vartheta" scores
    the option-transition outcomes of the shifted chain (continuation uses
    the continuation score, a switch uses the termination score).
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if mdp.gamma >= 1.0:
        raise SingularSystem("path sampling requires gamma < 1")
    chain = build_chain(mdp, params, fmap, pi_over, start=start)
    S, O = mdp.num_states, params.num_options
    n = S * O
    gamma = mdp.gamma

    if manifold == "theta":
        pi, _, _ = policy_tables(mdp, params, fmap)
        scores = theta_score_table(mdp, params, fmap).reshape(n, params.num_actions, -1)
        pi_cum = np.cumsum(pi.reshape(n, -1), axis=1)
        kernel_cum = np.cumsum(chain.kernel, axis=1)
        start_cum = np.cumsum(chain.start)
        dim = params.theta_size
        cur = _draw_rows(start_cum[None, :].repeat(num_paths, 0), rng.random(num_paths))
        total = np.zeros((num_paths, dim))
        for _ in range(horizon):
            a = _draw_rows(pi_cum[cur], rng.random(num_paths))
            total += scores[cur, a]
            nxt = _draw_rows(kernel_cum[cur], rng.random(num_paths))
            fresh = _draw_rows(start_cum[None, :].repeat(num_paths, 0), rng.random(num_paths))
            cur = np.where(rng.random(num_paths) < 1.0 - gamma, fresh, nxt)
        return (total.T @ total) / (num_paths * horizon)

    if manifold != "vartheta":
        raise ValueError("manifold must be 'theta' or 'vartheta'")
    if start is None:
        start_vec = chain.start @ chain.state_step
    elif isinstance(start, tuple):
        start_vec = np.zeros(n)
        start_vec[pair_index(start[0], start[1], O)] = 1.0
    else:
        start_vec = np.asarray(start, dtype=float).reshape(-1)
    _, dlnbeta, dlncont = vartheta_score_tables(mdp, params, fmap, pi_over)
    term_scores = dlnbeta.reshape(n, -1)
    cont_scores = dlncont.reshape(n, -1)
    # switch outcome per arrival pair: rows of B restricted to the pair's state
    switch = np.empty((n, O))
    for s in range(S):
        blk = chain.option_switch[s * O:(s + 1) * O, s * O:(s + 1) * O]
        switch[s * O:(s + 1) * O] = blk
    switch_cum = np.cumsum(switch, axis=1)
    state_marg = np.empty((n, S))
    for o in range(O):
        state_marg[o::O] = chain.state_step[o::O, o::O]
    state_cum = np.cumsum(state_marg, axis=1)
    start_cum = np.cumsum(start_vec)
    dim = params.vartheta_size
    cur = _draw_rows(start_cum[None, :].repeat(num_paths, 0), rng.random(num_paths))
    total = np.zeros((num_paths, dim))
    incumbents = cur % O
    for _ in range(horizon):
        new_opt = _draw_rows(switch_cum[cur], rng.random(num_paths))
        stayed = new_opt == incumbents
        total += np.where(stayed[:, None], cont_scores[cur], term_scores[cur])
        states = cur // O
        sp = _draw_rows(state_cum[states * O + new_opt], rng.random(num_paths))
        nxt = sp * O + new_opt
        fresh = _draw_rows(start_cum[None, :].repeat(num_paths, 0), rng.random(num_paths))
        cur = np.where(rng.random(num_paths) < 1.0 - gamma, fresh, nxt)
        incumbents = cur % O
    return (total.T @ total) / (num_paths * horizon)


def _draw_rows(cum_rows, u):
    "Vectorized inverse-CDF draw: one index per row of cumulative weights."
    idx = (cum_rows < u[:, None]).sum(axis=1)
    return np.minimum(idx, cum_rows.shape[1] - 1)


# ---------------------------------------------------------------------------
# TD-error consistency samplers (exact tables plugged in).
# ---------------------------------------------------------------------------


def sample_delta_u(mdp, params, fmap, pi_over, sol: ExactSolution, s, o, a, n, rng):
    """n draws of r + gamma u(o, S') - q(s, o) conditioned on (s, o, a)."""
    gamma = mdp.gamma
    sp = rng.choice(mdp.num_states, size=n, p=mdp.transition[s, a])
    live = ~mdp.terminal[sp]
    return mdp.reward[s, a, sp] + gamma * np.where(live, sol.u[sp, o], 0.0) - sol.q_omega[s, o]


def sample_delta_omega(mdp, params, fmap, pi_over, sol: ExactSolution, s, o, n, rng,
                       bootstrap="pair"):
    """n draws of the termination TD error conditioned on the incumbent pair (s, o).

    bootstrap="pair" replaces v(S') by q(S', O') at the realized next option,
    the expansion the consistency argument actually integrates; "state" keeps
    the plain v(S') bootstrap, whose conditional mean carries an extra
    gamma E[(1-beta) a_omega(S', o)] term.
    """
    gamma = mdp.gamma
    _, beta, _ = policy_tables(mdp, params, fmap)
    a = rng.choice(mdp.num_actions, size=n, p=intra_option_probs(params, fmap, o, s))
    sp = np.empty(n, dtype=int)
    for act in np.unique(a):
        m = a == act
        sp[m] = rng.choice(mdp.num_states, size=int(m.sum()), p=mdp.transition[s, act])
    r = mdp.reward[s, a, sp]
    live = ~mdp.terminal[sp]
    if bootstrap == "state":
        boot = np.where(live, sol.v[sp], 0.0)
    elif bootstrap == "pair":
        op = np.empty(n, dtype=int)
        for state in np.unique(sp):
            m = sp == state
            b = beta[state, o]
            dist = b * pi_over.probs[state].copy()
            dist[o] += 1.0 - b
            op[m] = rng.choice(params.num_options, size=int(m.sum()), p=dist / dist.sum())
        boot = np.where(live, sol.q_omega[sp, op], 0.0)
    else:
        raise ValueError("bootstrap must be 'pair' or 'state'")
    return r + gamma * boot - sol.v[s]


# ---------------------------------------------------------------------------
# Finite-horizon enumeration used by the experiment acceptance thresholds.
# ---------------------------------------------------------------------------


def finite_horizon_flat_value(mdp, flat_policy, horizon, gamma=1.0):
    """Backward induction value of a flat action policy over `horizon` steps."""
    v = np.zeros(mdp.num_states)
    r_sa = mdp.expected_reward()
    for _ in range(horizon):
        q = r_sa + gamma * np.einsum("sap,p->sa", mdp.transition, v)
        v_new = np.einsum("sa,sa->s", flat_policy, q)
        v_new[mdp.terminal] = 0.0
        v = v_new
    return v


def best_option_assignment_return(mdp, params, fmap, horizon, gamma=1.0):
    """Best start-weighted finite-horizon return over per-state option choices.

    Enumerates every deterministic map state -> option, evaluates the flat
    policy that always acts with the assigned option's action distribution,
    and returns (best value under d0, best assignment).
    """
    S, O = mdp.num_states, params.num_options
    if O ** S > 4096:
        raise InstanceTooLarge("too many assignments to enumerate")
    pi, _, _ = policy_tables(mdp, params, fmap)
    best, best_assign = -np.inf, None
    for code in range(O ** S):
        assign = [(code // (O ** s)) % O for s in range(S)]
        flat = np.stack([pi[s, assign[s]] for s in range(S)])
        val = float(mdp.initial_dist @ finite_horizon_flat_value(mdp, flat, horizon, gamma))
        if val > best:
            best, best_assign = val, assign
    return best, best_assign
