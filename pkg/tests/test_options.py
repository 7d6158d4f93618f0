from math import log

import numpy as np
import pytest

from inoc.options import (
    DegenerateLikelihood,
    OptionParams,
    PolicyOverOptionsTable,
    continuation_prob,
    explicit_policy_over_options,
    grad_log_continuation,
    grad_log_intra_option,
    grad_log_termination,
    intra_option_probs,
    likelihood_ratio,
    one_hot_features,
    select_option,
    termination_prob,
    zero_params,
)

FD_STEP = 1e-5


def random_params(rng, num_options=2, dim=3, num_actions=2, scale=0.8, clamp=1e-6):
    return OptionParams(
        num_options=num_options,
        theta=rng.normal(0.0, scale, size=(num_options, dim, num_actions)),
        vartheta=rng.normal(0.0, scale, size=(num_options, dim)),
        beta_clamp=clamp,
    )


def fd_check(f, params, arr_name, grad, rel_tol=1e-6):
    "Central finite differences of f over the named stacked parameter array."
    arr = getattr(params, arr_name)
    flat = arr.reshape(-1)
    fd = np.empty(flat.size)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + FD_STEP
        hi = f()
        flat[i] = old - FD_STEP
        lo = f()
        flat[i] = old
        fd[i] = (hi - lo) / (2 * FD_STEP)
    scale = max(np.linalg.norm(fd), 1e-12)
    assert np.linalg.norm(fd - grad) / scale < rel_tol


def test_uniform_on_zero_logits():
    params = zero_params(1, 3, 2)
    fmap = one_hot_features(3)
    assert np.allclose(intra_option_probs(params, fmap, 0, 1), [0.5, 0.5])


def test_softmax_closed_form():
    params = zero_params(1, 1, 2)
    params.theta[0, 0, 0] = log(3.0)
    fmap = one_hot_features(1)
    assert np.allclose(intra_option_probs(params, fmap, 0, 0), [0.75, 0.25], atol=1e-12)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(0)
    params = random_params(rng)
    fmap = one_hot_features(3)
    base = intra_option_probs(params, fmap, 0, 2)
    params.theta[0, 2, :] += 7.3
    assert np.allclose(intra_option_probs(params, fmap, 0, 2), base, atol=1e-12)


def test_grad_log_intra_option_finite_difference():
    rng = np.random.default_rng(1)
    fmap = one_hot_features(3)
    for _ in range(100):
        params = random_params(rng)
        o = int(rng.integers(2))
        s = int(rng.integers(3))
        a = int(rng.integers(2))
        g = grad_log_intra_option(params, fmap, o, s, a)
        fd_check(lambda: float(np.log(intra_option_probs(params, fmap, o, s)[a])),
                 params, "theta", g)


def test_score_identity_exact():
    rng = np.random.default_rng(2)
    params = random_params(rng)
    fmap = one_hot_features(3)
    for o in range(2):
        for s in range(3):
            pi = intra_option_probs(params, fmap, o, s)
            total = sum(pi[a] * grad_log_intra_option(params, fmap, o, s, a) for a in range(2))
            assert np.abs(total).max() < 1e-10


def test_grad_log_intra_option_tabular_zero_theta():
    params = zero_params(2, 2, 2)
    fmap = one_hot_features(2)
    g = grad_log_intra_option(params, fmap, 0, 1, 0).reshape(2, 2, 2)
    assert g[0, 1, 0] == 0.5 and g[0, 1, 1] == -0.5
    assert np.all(g[1] == 0.0)  # other option's block untouched
    assert np.all(g[0, 0] == 0.0)  # other state's features untouched


def test_termination_prob_values():
    params = zero_params(1, 1, 2)
    fmap = one_hot_features(1)
    assert termination_prob(params, fmap, 0, 0) == 0.5
    params.vartheta[0, 0] = log(3.0)
    assert abs(termination_prob(params, fmap, 0, 0) - 0.75) < 1e-12
    params.vartheta[0, 0] = 40.0
    assert termination_prob(params, fmap, 0, 0) == 1.0 - 1e-6  # clamp engages


def test_grad_log_termination_closed_form_and_fd():
    params = zero_params(2, 2, 2)
    fmap = one_hot_features(2)
    g = grad_log_termination(params, fmap, 0, 1).reshape(2, 2)
    assert g[0, 1] == 0.5 and np.all(g[1] == 0.0)
    rng = np.random.default_rng(3)
    for _ in range(100):
        params = random_params(rng)
        o = int(rng.integers(2))
        s = int(rng.integers(3))
        g = grad_log_termination(params, fmap3 := one_hot_features(3), o, s)
        fd_check(lambda: float(np.log(termination_prob(params, fmap3, o, s))),
                 params, "vartheta", g)


def test_continuation_prob_limits_and_formula():
    fmap = one_hot_features(1)
    pi_over = PolicyOverOptionsTable(np.array([[0.25, 0.75]]))
    params = zero_params(2, 1, 2, beta_clamp=1e-12)
    params.vartheta[0, 0] = -40.0  # beta ~ 0
    assert abs(continuation_prob(params, fmap, pi_over, 0, 0) - 1.0) < 1e-9
    params.vartheta[0, 0] = 40.0  # beta ~ 1
    assert abs(continuation_prob(params, fmap, pi_over, 0, 0) - 0.25) < 1e-9
    params.vartheta[0, 0] = log(1.0 / 9.0)  # beta = 0.1 exactly
    assert abs(continuation_prob(params, fmap, pi_over, 0, 0) - 0.925) < 1e-12


def test_grad_log_continuation_identity_and_fd():
    rng = np.random.default_rng(4)
    fmap = one_hot_features(3)
    for _ in range(50):
        params = random_params(rng)
        probs = rng.dirichlet(np.ones(2), size=3) * 0.8 + 0.1
        probs /= probs.sum(axis=1, keepdims=True)
        pi_over = PolicyOverOptionsTable(probs)
        o = int(rng.integers(2))
        s = int(rng.integers(3))
        gc = grad_log_continuation(params, fmap, pi_over, o, s)
        gt = grad_log_termination(params, fmap, o, s)
        L = likelihood_ratio(params, fmap, pi_over, o, s)
        assert np.abs(L * gc + gt).max() < 1e-9
        fd_check(lambda: float(np.log(continuation_prob(params, fmap, pi_over, o, s))),
                 params, "vartheta", gc)


def test_grad_log_continuation_constant_when_reselection_certain():
    fmap = one_hot_features(1)
    pi_over = PolicyOverOptionsTable(np.array([[1.0, 0.0]]))
    params = zero_params(2, 1, 2)
    g = grad_log_continuation(params, fmap, pi_over, 0, 0)
    assert np.all(g == 0.0)


def test_degenerate_likelihood_raises():
    fmap = one_hot_features(1)
    pi_over = PolicyOverOptionsTable(np.array([[1.0, 0.0]]))
    # clamp weaker than the 1e-12 odds guard: option 1 never re-selected and
    # essentially never terminating, so the continuation odds blow up
    params = zero_params(2, 1, 2, beta_clamp=1e-13)
    params.vartheta[1, 0] = -40.0
    with pytest.raises(DegenerateLikelihood):
        likelihood_ratio(params, fmap, pi_over, 1, 0)
    with pytest.raises(DegenerateLikelihood):
        grad_log_continuation(params, fmap, pi_over, 1, 0)


def test_default_clamp_prevents_degeneracy():
    fmap = one_hot_features(1)
    pi_over = PolicyOverOptionsTable(np.array([[1.0, 0.0]]))
    params = zero_params(2, 1, 2)  # default clamp 1e-6
    params.vartheta[1, 0] = -40.0
    assert likelihood_ratio(params, fmap, pi_over, 1, 0) < 1.1e6


def test_select_option_greedy_and_ties():
    q = np.array([[1.0, 1.0], [0.0, 2.0]])
    rng = np.random.default_rng(5)
    assert select_option(q, 0, 0.0, rng) == 0  # tie to the lowest index
    assert select_option(q, 1, 0.0, rng) == 1


def test_select_option_uniform_when_exploring():
    q = np.zeros((1, 4))
    rng = np.random.default_rng(6)
    n = 100_000
    counts = np.bincount([select_option(q, 0, 1.0, rng) for _ in range(n)], minlength=4)
    assert np.all(np.abs(counts / n - 0.25) < 0.01)


def test_explicit_policy_over_options_values():
    table = explicit_policy_over_options(np.array([[5.0, 1.0]]), 0.1)
    assert np.allclose(table.probs, [[0.95, 0.05]])
    uniform = explicit_policy_over_options(np.array([[5.0, 1.0]]), 1.0)
    assert np.allclose(uniform.probs, [[0.5, 0.5]])


def test_select_option_frequencies_match_table():
    q = np.array([[0.3, 0.9, 0.1]])
    eps = 0.2
    table = explicit_policy_over_options(q, eps)
    rng = np.random.default_rng(8)
    n = 100_000
    counts = np.bincount([select_option(q, 0, eps, rng) for _ in range(n)], minlength=3)
    freq = counts / n
    se = np.sqrt(table.probs[0] * (1 - table.probs[0]) / n)
    assert np.all(np.abs(freq - table.probs[0]) < 3 * se + 1e-9)
