"""Compiled episode runner for the experiment harness.

Mirrors ``agent.run_episode`` step for step, consuming random numbers from
the same generator in the same order, so a seeded run produces the same
trajectory through either path (up to last-ulp float noise in the learned
tables). Requires tabular one-hot features; the harness falls back to the
reference loop otherwise.

Mode codes: 0 INOC, 1 INOC with the derived rank-1 correction, 2 vanilla.
delta-omega form codes: 0 text, 1 line-12. value-style codes: 0
epsilon-greedy expectation, 1 max.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MODE_CODES = {"inoc": 0, "inoc_derived": 1, "vanilla": 2}
DFORM_CODES = {"text": 0, "line12": 1}
VSTYLE_CODES = {"epsilon_greedy_expectation": 0, "max": 1}


@njit(cache=True)
def _draw(dist, u):
    acc = 0.0
    last = 0
    for i in range(dist.shape[0]):
        p = dist[i]
        if p > 0.0:
            last = i
            acc += p
            if u < acc:
                return i
    return last


@njit(cache=True)
def _greedy(q, s):
    best = 0
    for o in range(1, q.shape[1]):
        if q[s, o] > q[s, best]:
            best = o
    return best


@njit(cache=True)
def _select_option(q, s, epsilon, rng):
    num_options = q.shape[1]
    if rng.random() < epsilon:
        k = int(rng.random() * num_options)
        if k > num_options - 1:
            k = num_options - 1
        return k
    return _greedy(q, s)


@njit(cache=True)
def _v_of(q, s, epsilon, vstyle, prow):
    num_options = q.shape[1]
    if vstyle == 1:
        m = q[s, 0]
        for o in range(1, num_options):
            if q[s, o] > m:
                m = q[s, o]
        return m
    for o in range(num_options):
        prow[o] = epsilon / num_options
    prow[_greedy(q, s)] += 1.0 - epsilon
    v = 0.0
    for o in range(num_options):
        v += prow[o] * q[s, o]
    return v


@njit(cache=True)
def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


@njit(cache=True)
def _beta(vartheta, o, s, clamp):
    b = _sigmoid(vartheta[o, s])
    if b < clamp:
        return clamp
    if b > 1.0 - clamp:
        return 1.0 - clamp
    return b


@njit(cache=True)
def run_episodes(P, R, d0, terminal, cap, gamma,
                 theta, vartheta, q,
                 lam, a_eta, a_phi, a_theta, a_vartheta, lr, epsilon, clamp,
                 mode, dform, vstyle, num_episodes, rng, out):
    """Run episodes in place; out[e] = (disc, undisc, steps, guard_frac, truncated)."""
    S = P.shape[0]
    A = P.shape[1]
    O = q.shape[1]
    eta = np.zeros((O, S, A))
    e_eta = np.zeros((O, S, A))
    phi = np.zeros((O, S))
    e_phi = np.zeros((O, S))
    eta_f = eta.reshape(-1)
    e_eta_f = e_eta.reshape(-1)
    phi_f = phi.reshape(-1)
    e_phi_f = e_phi.reshape(-1)
    theta_f = theta.reshape(-1)
    vartheta_f = vartheta.reshape(-1)
    n_th = eta_f.shape[0]
    n_vt = phi_f.shape[0]
    pi = np.zeros(A)
    prow = np.zeros(O)
    glocal = np.zeros(A)
    for ep in range(num_episodes):
        eta[:] = 0.0
        e_eta[:] = 0.0
        phi[:] = 0.0
        e_phi[:] = 0.0
        s = _draw(d0, rng.random())
        ret_disc = 0.0
        ret_undisc = 0.0
        discount = 1.0
        steps = 0
        guard = 0
        truncated = 0.0
        if terminal[s] == 0:
            o = _select_option(q, s, epsilon, rng)
            o_prev = -1
            while True:
                # softmax of theta[o, s, :]
                m = theta[o, s, 0]
                for a_i in range(1, A):
                    if theta[o, s, a_i] > m:
                        m = theta[o, s, a_i]
                tot = 0.0
                for a_i in range(A):
                    pi[a_i] = np.exp(theta[o, s, a_i] - m)
                    tot += pi[a_i]
                for a_i in range(A):
                    pi[a_i] /= tot
                a = _draw(pi, rng.random())
                s_next = _draw(P[s, a], rng.random())
                r = R[s, a, s_next]
                term = terminal[s_next] != 0
                if o_prev >= 0 and o == o_prev:
                    guard += 1
                # snapshot values
                v_next = _v_of(q, s_next, epsilon, vstyle, prow)
                b_next = _beta(vartheta, o, s_next, clamp)
                boot = 0.0
                if not term:
                    boot = (1.0 - b_next) * q[s_next, o] + b_next * v_next
                delta_u = r + gamma * boot - q[s, o]
                for a_i in range(A):
                    glocal[a_i] = -pi[a_i]
                glocal[a] += 1.0

                if mode == 2:
                    for a_i in range(A):
                        theta[o, s, a_i] += a_theta * delta_u * glocal[a_i]
                    braw = _sigmoid(vartheta[o, s_next])
                    adv = q[s_next, o] - v_next
                    vartheta[o, s_next] -= a_vartheta * braw * (1.0 - braw) * adv
                else:
                    dot = 0.0
                    for a_i in range(A):
                        dot += glocal[a_i] * eta[o, s, a_i]
                    for k in range(n_th):
                        e_eta_f[k] *= lam
                    for a_i in range(A):
                        e_eta[o, s, a_i] += glocal[a_i]
                    for k in range(n_th):
                        eta_f[k] += a_eta * delta_u * e_eta_f[k]
                    for a_i in range(A):
                        eta[o, s, a_i] -= a_eta * dot * glocal[a_i]
                    nrm = 0.0
                    for k in range(n_th):
                        nrm += eta_f[k] * eta_f[k]
                    nrm = np.sqrt(nrm)
                    if nrm >= 1e-12:
                        c = a_theta / nrm
                        for k in range(n_th):
                            theta_f[k] += c * eta_f[k]
                    if o_prev >= 0 and o == o_prev:
                        braw_s = _sigmoid(vartheta[o, s])
                        hval = 1.0 - braw_s
                        b_here = _beta(vartheta, o, s, clamp)
                        if mode == 1:
                            p_here = epsilon / O
                            if _greedy(q, s) == o:
                                p_here += 1.0 - epsilon
                            b_cont = 1.0 - b_here + b_here * p_here
                            if 1.0 - b_cont < 1e-12:
                                raise ValueError("continuation probability reached 1")
                            h2val = (p_here - 1.0) * braw_s * (1.0 - braw_s) / b_cont
                        else:
                            h2val = hval
                        dot2 = h2val * phi[o, s]
                        for k in range(n_vt):
                            e_phi_f[k] *= lam
                        e_phi[o, s] += hval
                        v_here = _v_of(q, s, epsilon, vstyle, prow)
                        boot_v = 0.0
                        if not term:
                            boot_v = v_next
                        if dform == 1:
                            delta_om = r + gamma * boot_v - gamma * v_here
                        else:
                            delta_om = r + gamma * boot_v - v_here
                        for k in range(n_vt):
                            phi_f[k] += a_phi * b_here * delta_om * e_phi_f[k]
                        phi[o, s] += a_phi * dot2 * hval
                        nrm = 0.0
                        for k in range(n_vt):
                            nrm += phi_f[k] * phi_f[k]
                        nrm = np.sqrt(nrm)
                        if nrm >= 1e-12:
                            c = a_vartheta / nrm
                            for k in range(n_vt):
                                vartheta_f[k] -= c * phi_f[k]

                # critic refreshes its TD error with the post-update terminations
                b_new = _beta(vartheta, o, s_next, clamp)
                boot = 0.0
                if not term:
                    boot = (1.0 - b_new) * q[s_next, o] + b_new * v_next
                q[s, o] += lr * (r + gamma * boot - q[s, o])

                ret_disc += discount * r
                ret_undisc += r
                discount *= gamma
                steps += 1
                o_prev = o
                if term:
                    break
                if cap >= 0 and steps >= cap:
                    truncated = 1.0
                    break
                if rng.random() < _beta(vartheta, o, s_next, clamp):
                    eta[:] = 0.0
                    e_eta[:] = 0.0
                    phi[:] = 0.0
                    e_phi[:] = 0.0
                    o = _select_option(q, s_next, epsilon, rng)
                s = s_next
        frac = 0.0
        if steps > 0:
            frac = guard / steps
        out[ep, 0] = ret_disc
        out[ep, 1] = ret_undisc
        out[ep, 2] = steps
        out[ep, 3] = frac
        out[ep, 4] = truncated


def run_many(mdp, params, critic, fmap, mode: str, num_episodes: int,
             rng: np.random.Generator, delta_omega_form: str = "text",
             lam=0.5, alpha_eta=0.5, alpha_phi=0.75, alpha_theta=0.0025,
             alpha_vartheta=0.0025) -> np.ndarray:
    """Drive the kernel for a whole run; mutates params and critic in place.

    Returns an array (num_episodes, 5) of per-episode
    (discounted return, undiscounted return, steps, guard fraction, truncated).
    """
    if not fmap.one_hot or fmap.dimension != mdp.num_states:
        raise ValueError("compiled runner requires tabular one-hot features")
    for arr in (params.theta, params.vartheta, critic.q_omega):
        if not arr.flags["C_CONTIGUOUS"]:
            raise ValueError("parameter arrays must be C-contiguous (kernel mutates views)")
    out = np.empty((num_episodes, 5))
    cap = mdp.max_episode_steps if mdp.max_episode_steps is not None else -1
    run_episodes(
        np.ascontiguousarray(mdp.transition),
        np.ascontiguousarray(mdp.reward),
        np.ascontiguousarray(mdp.initial_dist),
        mdp.terminal.astype(np.uint8),
        cap,
        mdp.gamma,
        params.theta,
        params.vartheta,
        critic.q_omega,
        lam,
        alpha_eta,
        alpha_phi,
        alpha_theta,
        alpha_vartheta,
        critic.learning_rate,
        params.epsilon_over_options,
        params.beta_clamp,
        MODE_CODES[mode],
        DFORM_CODES[delta_omega_form],
        VSTYLE_CODES[critic.value_style],
        num_episodes,
        rng,
        out,
    )
    return out


def warmup():
    "Trigger kernel compilation on a toy instance."
    from .envs import two_state_initialization, two_state_mdp
    from .options import one_hot_features

    m = two_state_mdp()
    for mode in ("inoc", "inoc_derived", "vanilla"):
        params, critic = two_state_initialization()
        run_many(m, params, critic, one_hot_features(2), mode, 2,
                 np.random.default_rng(0))
