from math import log

import numpy as np
import pytest

from inoc.critic import (
    CriticTables,
    q_learning_update,
    td_error_omega,
    td_error_u,
    u_of,
    v_of,
    zero_critic,
)
from inoc.envs import two_state_initialization, two_state_mdp
from inoc.mdp import TabularMdp, sample_from
from inoc.options import (
    OptionParams,
    PolicyOverOptionsTable,
    intra_option_probs,
    one_hot_features,
    zero_params,
)
from inoc.oracle import exact_values, policy_tables, sample_delta_omega, sample_delta_u
from inoc.verify import random_instance


def test_v_of_single_option():
    critic = CriticTables(np.array([[3.0], [1.0]]))
    table = PolicyOverOptionsTable(np.array([[1.0], [1.0]]))
    assert v_of(critic, table, 0) == 3.0


def test_v_of_expectation_and_max_agree_when_greedy():
    q = np.array([[2.0, 4.0]])
    greedy = PolicyOverOptionsTable(np.array([[0.0, 1.0]]))
    exp_style = CriticTables(q.copy(), value_style="epsilon_greedy_expectation")
    max_style = CriticTables(q.copy(), value_style="max")
    assert v_of(exp_style, greedy, 0) == v_of(max_style, greedy, 0) == 4.0


def test_v_of_expectation():
    critic = CriticTables(np.array([[2.0, 4.0]]))
    table = PolicyOverOptionsTable(np.array([[0.5, 0.5]]))
    assert v_of(critic, table, 0) == 3.0


def test_u_of_limits_and_formula():
    fmap = one_hot_features(1)
    table = PolicyOverOptionsTable(np.array([[0.0, 1.0]]))
    critic = CriticTables(np.array([[2.0, 6.0]]))  # v = 6 under the table
    params = zero_params(2, 1, 2, beta_clamp=1e-12)
    params.vartheta[0, 0] = -40.0  # beta ~ 0
    assert abs(u_of(critic, params, fmap, table, 0, 0) - 2.0) < 1e-8
    params.vartheta[0, 0] = 40.0  # beta ~ 1
    assert abs(u_of(critic, params, fmap, table, 0, 0) - 6.0) < 1e-8
    params.vartheta[0, 0] = log(1.0 / 3.0)  # beta = 0.25 exactly
    assert abs(u_of(critic, params, fmap, table, 0, 0) - 3.0) < 1e-12


def test_td_error_u_no_bootstrap_cases():
    fmap = one_hot_features(1)
    table = PolicyOverOptionsTable(np.array([[1.0]]))
    critic = CriticTables(np.array([[1.5]]))
    params = zero_params(1, 1, 2)
    # gamma = 0
    assert td_error_u(critic, params, fmap, table, 0, 0, 2.0, 0, False, 0.0) == 0.5
    # terminal next state
    assert td_error_u(critic, params, fmap, table, 0, 0, 2.0, 0, True, 0.9) == 0.5


def test_td_error_omega_forms():
    table = PolicyOverOptionsTable(np.array([[1.0], [1.0]]))
    critic = CriticTables(np.array([[4.0], [4.0]]))
    # v equal at s and s', r = 0, gamma = 1 -> 0
    assert td_error_omega(critic, table, 0, 0.0, 1, False, 1.0) == 0.0
    # gamma = 0: r - v(s)
    assert td_error_omega(critic, table, 0, 1.0, 1, False, 0.0) == -3.0
    # line-12 form discounts the standing value too
    got = td_error_omega(critic, table, 0, 0.0, 1, False, 0.5, form="line12")
    assert got == 0.5 * 4.0 - 0.5 * 4.0
    with pytest.raises(ValueError):
        td_error_omega(critic, table, 0, 0.0, 1, False, 0.5, form="nope")


def test_lemma_u_conditional_mean():
    "With exact tables plugged in, E[delta_u | s, o, a] = a_u(s, o, a)."
    rng = np.random.default_rng(0)
    mdp, params, fmap, pi_over = random_instance(rng)
    sol = exact_values(mdp, params, fmap, pi_over)
    for s in range(3):
        for o in range(2):
            for a in range(2):
                draws = sample_delta_u(mdp, params, fmap, pi_over, sol, s, o, a, 8000, rng)
                se = draws.std(ddof=1) / np.sqrt(draws.size)
                assert abs(draws.mean() - sol.a_u[s, o, a]) < 3 * se + 1e-12


def test_lemma_u_sampler_matches_td_error_u():
    "The vectorized sampler and the critic TD error agree draw by draw."
    rng = np.random.default_rng(1)
    mdp, params, fmap, pi_over = random_instance(rng)
    sol = exact_values(mdp, params, fmap, pi_over)
    critic = CriticTables(sol.q_omega.copy())
    s, o, a = 1, 0, 1
    for _ in range(20):
        state = rng.bit_generator.state
        draw = float(sample_delta_u(mdp, params, fmap, pi_over, sol, s, o, a, 1, rng)[0])
        rng.bit_generator.state = state
        sp = int(rng.choice(mdp.num_states, size=1, p=mdp.transition[s, a])[0])
        direct = td_error_u(critic, params, fmap, pi_over, s, o,
                            float(mdp.reward[s, a, sp]), sp, bool(mdp.terminal[sp]),
                            mdp.gamma)
        assert abs(draw - direct) < 1e-12


def test_lemma_omega_conditional_mean_pair_bootstrap():
    "E[delta_omega | incumbent pair] = a_omega with the realized-pair bootstrap."
    rng = np.random.default_rng(2)
    mdp, params, fmap, pi_over = random_instance(rng)
    sol = exact_values(mdp, params, fmap, pi_over)
    for s in range(3):
        for o in range(2):
            draws = sample_delta_omega(mdp, params, fmap, pi_over, sol, s, o, 8000, rng,
                                       bootstrap="pair")
            se = draws.std(ddof=1) / np.sqrt(draws.size)
            assert abs(draws.mean() - sol.a_omega[s, o]) < 3 * se + 1e-12


def test_lemma_omega_state_bootstrap_bias_is_the_derived_one():
    """The plain v(s') bootstrap converges to a_omega plus a computable offset.

    E[r + gamma v(S') - v(s) | s, o] = a_omega(s, o)
        - gamma E[(1 - beta_o(S')) a_omega(S', o) | s, o].
    """
    rng = np.random.default_rng(3)
    mdp, params, fmap, pi_over = random_instance(rng)
    sol = exact_values(mdp, params, fmap, pi_over)
    pi, beta, _ = policy_tables(mdp, params, fmap)
    for s in range(3):
        for o in range(2):
            marg = pi[s, o] @ mdp.transition[s]  # distribution of S'
            offset = mdp.gamma * float(marg @ ((1.0 - beta[:, o]) * sol.a_omega[:, o]))
            expected = sol.a_omega[s, o] - offset
            draws = sample_delta_omega(mdp, params, fmap, pi_over, sol, s, o, 20000, rng,
                                       bootstrap="state")
            se = draws.std(ddof=1) / np.sqrt(draws.size)
            assert abs(draws.mean() - expected) < 3 * se + 1e-12


def test_q_learning_update_touches_one_cell():
    fmap = one_hot_features(2)
    table = PolicyOverOptionsTable(np.full((2, 2), 0.5))
    critic = zero_critic(2, 2, learning_rate=0.3)
    params = zero_params(2, 2, 2)
    before = critic.q_omega.copy()
    q_learning_update(critic, params, fmap, table, 0, 1, 1.0, 1, False, 0.9)
    changed = critic.q_omega != before
    assert changed.sum() == 1 and changed[0, 1]


def test_q_learning_bandit_fixed_point():
    "Single state, single option, reward 1, gamma 0: q converges to 1."
    fmap = one_hot_features(1)
    table = PolicyOverOptionsTable(np.array([[1.0]]))
    critic = zero_critic(1, 1, learning_rate=0.5)
    params = zero_params(1, 1, 1)
    for _ in range(200):
        q_learning_update(critic, params, fmap, table, 0, 0, 1.0, 0, False, 0.0)
    assert abs(critic.q_omega[0, 0] - 1.0) < 1e-12


def test_q_learning_terminal_target_is_reward():
    fmap = one_hot_features(2)
    table = PolicyOverOptionsTable(np.full((2, 1), 1.0))
    critic = CriticTables(np.array([[5.0], [0.0]]), learning_rate=1.0)
    params = zero_params(1, 2, 2)
    q_learning_update(critic, params, fmap, table, 0, 0, 2.5, 1, True, 0.9)
    assert critic.q_omega[0, 0] == 2.5


def test_q_learning_converges_to_oracle_on_two_state():
    """Frozen policies and a frozen selection table: q reaches the exact values.

    10^5 on-policy updates with a per-cell decaying learning rate land within
    0.05 of the oracle solution in sup norm.
    """
    mdp = two_state_mdp()
    params, _ = two_state_initialization()
    fmap = one_hot_features(2)
    pi_over = PolicyOverOptionsTable(np.array([[0.1, 0.9], [0.1, 0.9]]))
    target = exact_values(mdp, params, fmap, pi_over).q_omega
    critic = zero_critic(2, 2, learning_rate=1.0)
    rng = np.random.default_rng(9)
    visits = np.zeros((2, 2))
    s = sample_from(mdp.initial_dist, rng.random())
    o = sample_from(pi_over.probs[s], rng.random())
    pi_cache = {(oo, ss): intra_option_probs(params, fmap, oo, ss)
                for oo in range(2) for ss in range(2)}
    beta = {(oo, ss): 0.1 if oo == 0 else 0.5 for oo in range(2) for ss in range(2)}
    steps_left = 30
    for _ in range(100_000):
        a = sample_from(pi_cache[(o, s)], rng.random())
        sp = sample_from(mdp.transition[s, a], rng.random())
        r = float(mdp.reward[s, a, sp])
        visits[s, o] += 1
        critic.learning_rate = 5.0 / (10.0 + visits[s, o])
        q_learning_update(critic, params, fmap, pi_over, s, o, r, sp, False, mdp.gamma)
        steps_left -= 1
        if steps_left == 0:
            steps_left = 30
            s = sample_from(mdp.initial_dist, rng.random())
            o = sample_from(pi_over.probs[s], rng.random())
            continue
        if rng.random() < beta[(o, sp)]:
            o = sample_from(pi_over.probs[sp], rng.random())
        s = sp
    assert np.abs(critic.q_omega - target).max() < 0.05
