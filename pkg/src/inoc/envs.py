"""The two desk-scale environments, built from committed data files.

The two-state MDP and the four-rooms grid both load from files shipped with
the package, so the files are the single source of truth for transition
rewards, layout, and goal placement. Builders validate what they return.
"""

from __future__ import annotations

from importlib import resources
from math import log

import numpy as np

from . import mdp as mdp_mod
from .critic import CriticTables
from .mdp import TabularMdp, validate
from .options import OptionParams

# Grid actions, in index order.
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right


def _data_text(name: str) -> str:
    return resources.files("inoc.data").joinpath(name).read_text()


def two_state_mdp(gamma: float | None = None) -> TabularMdp:
    """Two states, two actions, deterministic; self-loop rewards (1, 2)."""
    m = mdp_mod.from_text(_data_text("two_state.mdp"), name="two_state.mdp")
    if gamma is not None:
        m = TabularMdp(
            num_states=m.num_states,
            num_actions=m.num_actions,
            transition=m.transition,
            reward=m.reward,
            initial_dist=m.initial_dist,
            gamma=gamma,
            terminal=m.terminal,
            max_episode_steps=m.max_episode_steps,
        )
    return m


def two_state_initialization(epsilon: float = 0.03, critic_lr: float = 0.15,
                             q_bias: float = 10.0, value_style: str = "epsilon_greedy_expectation"):
    """Option and critic initialization for the two-state experiment.

    Two options act as noisy versions of the two primitive actions: option 0
    prefers action 0 with probability 0.9 in every state, option 1 prefers
    action 1. Option 0 is sticky (termination probability 0.1 everywhere,
    option 1 starts neutral at 0.5) and the critic starts biased toward
    option 0, so early behavior self-loops in state 0.
    """
    z = log(9.0)  # softmax([z, 0]) = (0.9, 0.1); sigmoid(-z) = 0.1
    theta = np.zeros((2, 2, 2))
    theta[0, :, 0] = z
    theta[1, :, 1] = z
    vartheta = np.zeros((2, 2))
    vartheta[0, :] = -z
    params = OptionParams(num_options=2, theta=theta, vartheta=vartheta,
                          epsilon_over_options=epsilon)
    q = np.zeros((2, 2))
    q[:, 0] = q_bias
    critic = CriticTables(q_omega=q, learning_rate=critic_lr, value_style=value_style)
    return params, critic


def parse_layout(text: str, gamma: float = 0.99, slip: float = 0.0,
                 goal_reward: float = 1.0, max_episode_steps: int = 2000) -> TabularMdp:
    """Grid layout to TabularMdp: '#' wall, '.' floor, 'G' terminal goal.

    Moves are deterministic (walking into a wall is a no-op); with ``slip``
    the intended move is replaced by a uniformly random one that often.
    Entering the goal pays ``goal_reward`` and ends the episode. The start
    distribution is uniform over non-goal cells.
    """
    rows = [r for r in text.splitlines() if r.strip()]
    cells = {}
    goal = None
    for i, row in enumerate(rows):
        for j, ch in enumerate(row):
            if ch in ".G ":
                if ch == "G":
                    goal = (i, j)
                cells[(i, j)] = len(cells)
    if not cells:
        raise ValueError("layout has no walkable cells")
    if goal is None:
        raise ValueError("layout has no goal cell")
    S, A = len(cells), len(MOVES)
    P = np.zeros((S, A, S))
    R = np.zeros((S, A, S))
    goal_idx = cells[goal]

    def target(pos, a):
        di, dj = MOVES[a]
        nxt = (pos[0] + di, pos[1] + dj)
        return cells.get(nxt, cells[pos])

    for pos, s in cells.items():
        if s == goal_idx:
            P[s, :, s] = 1.0
            continue
        for a in range(A):
            land = np.zeros(S)
            land[target(pos, a)] += 1.0 - slip
            for b in range(A):
                land[target(pos, b)] += slip / A
            P[s, a] = land
            R[s, a, goal_idx] = goal_reward
    d0 = np.ones(S)
    d0[goal_idx] = 0.0
    d0 /= d0.sum()
    terminal = np.zeros(S, dtype=bool)
    terminal[goal_idx] = True
    m = TabularMdp(
        num_states=S,
        num_actions=A,
        transition=P,
        reward=R,
        initial_dist=d0,
        gamma=gamma,
        terminal=terminal,
        max_episode_steps=max_episode_steps,
    )
    validate(m)
    return m


def four_rooms(gamma: float = 0.99, slip: float = 0.0) -> TabularMdp:
    """Classic four-rooms grid: 104 cells, 4 hallways, goal at the east doorway."""
    return parse_layout(_data_text("four_rooms.txt"), gamma=gamma, slip=slip)


def four_rooms_initialization(num_states: int, num_options: int = 4, epsilon: float = 0.05,
                              critic_lr: float = 0.5,
                              value_style: str = "epsilon_greedy_expectation",
                              rng: np.random.Generator | None = None,
                              theta_init_std: float = 1.5):
    """Randomly differentiated policies, neutral terminations, zero critic.

    Policy logits draw i.i.d. normal with ``theta_init_std`` so the options
    start distinct and the critic has something to rank; zero logits would
    leave every option an identical random walk.
    """
    theta = np.zeros((num_options, num_states, 4))
    if rng is not None and theta_init_std > 0:
        theta += rng.normal(0.0, theta_init_std, size=theta.shape)
    params = OptionParams(
        num_options=num_options,
        theta=theta,
        vartheta=np.zeros((num_options, num_states)),
        epsilon_over_options=epsilon,
    )
    critic = CriticTables(q_omega=np.zeros((num_states, num_options)),
                          learning_rate=critic_lr, value_style=value_style)
    return params, critic
