import numpy as np
import pytest

from inoc import mdp as mdp_mod
from inoc.envs import two_state_mdp
from inoc.mdp import (
    InvalidMdpError,
    TabularMdp,
    TerminalStateStep,
    sample_initial,
    sample_transition,
    validate,
    violations,
)

# chi-square critical values at alpha = 0.001
CHI2_999 = {1: 10.828, 2: 13.816, 3: 16.266}


def chain_mdp():
    "Deterministic 2-chain: action 0 moves 0 -> 1; state 1 terminal."
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = 1.0
    P[1, 0, 1] = 1.0
    R = np.zeros((2, 1, 2))
    R[0, 0, 1] = 0.5
    return TabularMdp(2, 1, P, R, [1.0, 0.0], 0.9, terminal=[False, True])


def test_two_state_is_valid():
    validate(two_state_mdp())


def test_row_sum_violation():
    m = two_state_mdp()
    P = m.transition.copy()
    P[0, 0] *= 0.9
    bad = TabularMdp(2, 2, P, m.reward, m.initial_dist, m.gamma)
    codes = {v.code for v in violations(bad)}
    assert "RowSumError" in codes
    with pytest.raises(InvalidMdpError):
        validate(bad)


def test_initial_mass_on_terminal_is_flagged():
    m = chain_mdp()
    bad = TabularMdp(2, 1, m.transition, m.reward, [0.5, 0.5], 0.9, terminal=[False, True])
    codes = {v.code for v in violations(bad)}
    assert "BadInitialDist" in codes


def test_terminal_not_absorbing_flagged():
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = 1.0
    P[1, 0, 0] = 1.0  # terminal state leaks back
    bad = TabularMdp(2, 1, P, np.zeros((2, 1, 2)), [1.0, 0.0], 0.9, terminal=[False, True])
    assert "TerminalNotAbsorbing" in {v.code for v in violations(bad)}


def test_negative_probability_flagged():
    m = two_state_mdp()
    P = m.transition.copy()
    P[0, 0, 0] = -0.1
    P[0, 0, 1] = 1.1
    bad = TabularMdp(2, 2, P, m.reward, m.initial_dist, m.gamma)
    assert "NegativeProbability" in {v.code for v in violations(bad)}


def test_sample_initial_matches_d0():
    m = two_state_mdp()
    rng = np.random.default_rng(7)
    n = 100_000
    draws = sum(sample_initial(m, rng) == 0 for _ in range(n))
    assert abs(draws / n - 0.8) < 0.004


def test_sample_initial_point_mass():
    m = chain_mdp()
    rng = np.random.default_rng(0)
    assert all(sample_initial(m, rng) == 0 for _ in range(50))


def test_sample_initial_uniform_four_states():
    P = np.zeros((4, 1, 4))
    P[:, 0, :] = 0.25
    m = TabularMdp(4, 1, P, np.zeros((4, 1, 4)), np.full(4, 0.25), 0.9)
    rng = np.random.default_rng(3)
    n = 100_000
    counts = np.bincount([sample_initial(m, rng) for _ in range(n)], minlength=4)
    assert np.all(np.abs(counts / n - 0.25) < 0.005)


def test_sample_transition_self_loops():
    m = two_state_mdp()
    rng = np.random.default_rng(1)
    assert sample_transition(m, 0, 0, rng) == (0, 1.0)
    assert sample_transition(m, 1, 1, rng) == (1, 2.0)
    assert sample_transition(m, 0, 1, rng) == (1, 0.0)


def test_sample_transition_terminal_raises():
    m = chain_mdp()
    with pytest.raises(TerminalStateStep):
        sample_transition(m, 1, 0, np.random.default_rng(0))


def test_transition_frequencies_chi_square():
    # random 3-outcome row; chi-square should not reject at alpha = 0.001
    probs = np.array([0.2, 0.5, 0.3])
    P = np.zeros((3, 1, 3))
    P[:, 0, :] = probs
    m = TabularMdp(3, 1, P, np.zeros((3, 1, 3)), [1.0, 0.0, 0.0], 0.9)
    rng = np.random.default_rng(11)
    n = 100_000
    counts = np.bincount([sample_transition(m, 0, 0, rng)[0] for _ in range(n)], minlength=3)
    stat = float((((counts - n * probs) ** 2) / (n * probs)).sum())
    assert stat < CHI2_999[2]


def test_reproducible_trajectories():
    m = two_state_mdp()

    def roll(seed):
        rng = np.random.default_rng(seed)
        s = sample_initial(m, rng)
        out = [s]
        for _ in range(40):
            s, r = sample_transition(m, s, int(rng.random() * 2), rng)
            out.append((s, r))
        return out

    assert roll(123) == roll(123)
    assert roll(123) != roll(124)


def test_description_file_round_trip():
    m = two_state_mdp()
    again = mdp_mod.from_text(mdp_mod.to_text(m))
    assert np.array_equal(again.transition, m.transition)
    assert np.array_equal(again.reward, m.reward)
    assert np.array_equal(again.initial_dist, m.initial_dist)
    assert again.gamma == m.gamma
    assert again.max_episode_steps == m.max_episode_steps


def test_description_file_round_trip_with_terminals():
    m = chain_mdp()
    again = mdp_mod.from_text(mdp_mod.to_text(m))
    assert np.array_equal(again.terminal, m.terminal)
    assert np.array_equal(again.transition, m.transition)


def test_parser_rejects_invalid():
    with pytest.raises(ValueError):
        mdp_mod.from_text("states 2\nactions 1\n")  # missing gamma
    with pytest.raises(ValueError):
        mdp_mod.from_text("states 2\nactions 1\ngamma 0.9\nbogus 1\n")
    bad = "states 2\nactions 1\ngamma 0.9\nd0 0 1.0\nt 0 0 0 0.5 0.0\nt 1 0 1 1.0 0.0\n"
    with pytest.raises(InvalidMdpError):
        mdp_mod.from_text(bad)  # row sums to 0.5


def test_expected_reward_marginalizes():
    m = two_state_mdp()
    r = m.expected_reward()
    assert r[0, 0] == 1.0 and r[1, 1] == 2.0 and r[0, 1] == 0.0
