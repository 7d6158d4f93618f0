"""Finite tabular MDPs: representation, validation, sampling, and a text file format.

States and actions are integer indices. Transitions are a dense tensor
``P[s, a, s']`` and rewards are stored per transition as ``R[s, a, s']``;
the expected reward ``r(s, a)`` is derived by marginalizing over ``s'``.
Terminal states are absorbing with zero reward. Instances are immutable
after construction and safe to share across runs; random sampling goes
through a caller-owned ``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PROB_ATOL = 1e-12


class InvalidMdpError(Exception):
    """Raised when validation fails; carries the full list of violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid MDP: {lines}")


class TerminalStateStep(Exception):
    """Sampling a transition out of a terminal state."""


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


def row_sum_error(s, a, total):
    return Violation("RowSumError", f"transition row ({s},{a},.) sums to {total!r}")


def negative_probability(where, value):
    return Violation("NegativeProbability", f"{where} = {value!r} < 0")


def terminal_not_absorbing(s, detail):
    return Violation("TerminalNotAbsorbing", f"terminal state {s}: {detail}")


def bad_initial_dist(detail):
    return Violation("BadInitialDist", detail)


@dataclass(frozen=True)
class TabularMdp:
    """Finite MDP ``(S, A, P, R, d0, gamma)`` plus terminal set and step cap.

    ``max_episode_steps`` truncates episodes for logging; truncation is not a
    terminal event and learners keep bootstrapping across it.
    """

    num_states: int
    num_actions: int
    transition: np.ndarray  # (S, A, S)
    reward: np.ndarray      # (S, A, S)
    initial_dist: np.ndarray  # (S,)
    gamma: float
    terminal: np.ndarray = field(default=None)  # (S,) bool
    max_episode_steps: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "transition", np.asarray(self.transition, dtype=float))
        object.__setattr__(self, "reward", np.asarray(self.reward, dtype=float))
        object.__setattr__(self, "initial_dist", np.asarray(self.initial_dist, dtype=float))
        term = self.terminal
        if term is None:
            term = np.zeros(self.num_states, dtype=bool)
        object.__setattr__(self, "terminal", np.asarray(term, dtype=bool))
        shape = (self.num_states, self.num_actions, self.num_states)
        if self.transition.shape != shape:
            raise ValueError(f"transition shape {self.transition.shape} != {shape}")
        if self.reward.shape != shape:
            raise ValueError(f"reward shape {self.reward.shape} != {shape}")
        if self.initial_dist.shape != (self.num_states,):
            raise ValueError("initial_dist length mismatch")

    def expected_reward(self):
        "r(s, a) = sum_s' P(s,a,s') R(s,a,s')"
        return np.einsum("sap,sap->sa", self.transition, self.reward)


def violations(mdp: TabularMdp) -> list[Violation]:
    """Collect every invariant violation (empty list means the MDP is valid)."""
    out: list[Violation] = []
    P, R, d0 = mdp.transition, mdp.reward, mdp.initial_dist
    if not (0.0 <= mdp.gamma <= 1.0):
        out.append(Violation("BadGamma", f"gamma = {mdp.gamma!r} outside [0, 1]"))
    if np.any(P < 0):
        s, a, sp = np.argwhere(P < 0)[0]
        out.append(negative_probability(f"transition({s},{a},{sp})", P[s, a, sp]))
    sums = P.sum(axis=2)
    bad = np.argwhere(np.abs(sums - 1.0) > PROB_ATOL)
    for s, a in bad[:16]:
        out.append(row_sum_error(int(s), int(a), float(sums[s, a])))
    if np.any(d0 < 0):
        s = int(np.argwhere(d0 < 0)[0])
        out.append(negative_probability(f"initial_dist({s})", float(d0[s])))
    if abs(d0.sum() - 1.0) > PROB_ATOL:
        out.append(bad_initial_dist(f"initial_dist sums to {float(d0.sum())!r}"))
    if np.any(d0[mdp.terminal] > 0):
        s = int(np.argwhere((d0 > 0) & mdp.terminal)[0])
        out.append(bad_initial_dist(f"initial mass {float(d0[s])!r} on terminal state {s}"))
    for s in np.flatnonzero(mdp.terminal):
        for a in range(mdp.num_actions):
            if abs(P[s, a, s] - 1.0) > PROB_ATOL:
                out.append(terminal_not_absorbing(int(s), f"P({s},{a},{s}) = {float(P[s, a, s])!r}"))
        if np.any(np.abs(R[s]) > 0):
            out.append(terminal_not_absorbing(int(s), "nonzero reward"))
    return out


def validate(mdp: TabularMdp) -> None:
    """Raise ``InvalidMdpError`` with the complete violation list, or return."""
    errs = violations(mdp)
    if errs:
        raise InvalidMdpError(errs)


def sample_from(dist: np.ndarray, u: float) -> int:
    """Inverse-CDF draw from a probability vector given a uniform in [0, 1).

    Shared by the reference and compiled simulators so both consume random
    numbers in the same order.
    """
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


def sample_initial(mdp: TabularMdp, rng: np.random.Generator) -> int:
    return sample_from(mdp.initial_dist, rng.random())


def sample_transition(mdp: TabularMdp, s: int, a: int, rng: np.random.Generator):
    """Draw ``s' ~ P(s, a, .)`` and return ``(s', reward(s, a, s'))``."""
    if mdp.terminal[s]:
        raise TerminalStateStep(f"state {s} is terminal")
    sp = sample_from(mdp.transition[s, a], rng.random())
    return sp, float(mdp.reward[s, a, sp])


# ---------------------------------------------------------------------------
# Description file format.
#
# Line-based text; '#' starts a comment, blank lines ignored.
#   states N
#   actions M
#   gamma G
#   max_episode_steps K        (optional)
#   d0 s p                     (one line per nonzero initial probability)
#   terminal s                 (zero or more)
#   t s a s' prob reward       (sparse transition entries)
# Terminal states need no 't' lines: they are filled in as absorbing
# self-loops with zero reward. Files failing validate() are rejected.
# ---------------------------------------------------------------------------


def from_file(path) -> TabularMdp:
    """Parse an MDP description file and validate it."""
    text = Path(path).read_text()
    return from_text(text, name=str(path))


def from_text(text: str, name: str = "<string>") -> TabularMdp:
    header: dict[str, float] = {}
    d0_entries: list[tuple[int, float]] = []
    terminals: list[int] = []
    entries: list[tuple[int, int, int, float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] in ("states", "actions", "max_episode_steps") and len(tok) == 2:
                header[tok[0]] = int(tok[1])
            elif tok[0] == "gamma" and len(tok) == 2:
                header["gamma"] = float(tok[1])
            elif tok[0] == "d0" and len(tok) == 3:
                d0_entries.append((int(tok[1]), float(tok[2])))
            elif tok[0] == "terminal" and len(tok) == 2:
                terminals.append(int(tok[1]))
            elif tok[0] == "t" and len(tok) == 6:
                entries.append((int(tok[1]), int(tok[2]), int(tok[3]), float(tok[4]), float(tok[5])))
            else:
                raise ValueError(f"unrecognized directive {tok[0]!r}")
        except ValueError as e:
            raise ValueError(f"{name}:{lineno}: {e}") from None
    for key in ("states", "actions", "gamma"):
        if key not in header:
            raise ValueError(f"{name}: missing '{key}' line")
    S, A = int(header["states"]), int(header["actions"])
    P = np.zeros((S, A, S))
    R = np.zeros((S, A, S))
    d0 = np.zeros(S)
    term = np.zeros(S, dtype=bool)
    for s in terminals:
        term[s] = True
    for s, p in d0_entries:
        d0[s] += p
    for s, a, sp, prob, rew in entries:
        P[s, a, sp] += prob
        R[s, a, sp] = rew
    for s in np.flatnonzero(term):
        P[s, :, :] = 0.0
        R[s, :, :] = 0.0
        P[s, :, s] = 1.0
    steps = header.get("max_episode_steps")
    mdp = TabularMdp(
        num_states=S,
        num_actions=A,
        transition=P,
        reward=R,
        initial_dist=d0,
        gamma=float(header["gamma"]),
        terminal=term,
        max_episode_steps=int(steps) if steps is not None else None,
    )
    validate(mdp)
    return mdp


def to_text(mdp: TabularMdp) -> str:
    """Serialize back to the description format (floats at full precision)."""
    out = [f"states {mdp.num_states}", f"actions {mdp.num_actions}",
           f"gamma {float(mdp.gamma)!r}"]
    if mdp.max_episode_steps is not None:
        out.append(f"max_episode_steps {mdp.max_episode_steps}")
    for s in np.flatnonzero(mdp.initial_dist > 0):
        out.append(f"d0 {s} {float(mdp.initial_dist[s])!r}")
    for s in np.flatnonzero(mdp.terminal):
        out.append(f"terminal {s}")
    for s in range(mdp.num_states):
        if mdp.terminal[s]:
            continue
        for a in range(mdp.num_actions):
            for sp in np.flatnonzero(mdp.transition[s, a] > 0):
                p = float(mdp.transition[s, a, sp])
                r = float(mdp.reward[s, a, sp])
                out.append(f"t {s} {a} {sp} {p!r} {r!r}")
    return "\n".join(out) + "\n"
