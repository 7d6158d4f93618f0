"""Labeled text checkpoints for option parameters and critic tables.

One line per coordinate, labeled by indices, with floats printed to 17
significant digits so values round-trip bit-exactly through decimal.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .critic import CriticTables
from .options import OptionParams

PARAMS_HEADER = "inoc-params 1"
CRITIC_HEADER = "inoc-critic 1"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def params_to_text(params: OptionParams) -> str:
    out = [
        PARAMS_HEADER,
        f"options {params.num_options}",
        f"feature_dim {params.feature_dim}",
        f"actions {params.num_actions}",
        f"epsilon {_fmt(params.epsilon_over_options)}",
        f"beta_clamp {_fmt(params.beta_clamp)}",
    ]
    O, D, A = params.theta.shape
    for o in range(O):
        for d in range(D):
            for a in range(A):
                out.append(f"theta {o} {d} {a} {_fmt(params.theta[o, d, a])}")
    for o in range(O):
        for d in range(D):
            out.append(f"vartheta {o} {d} {_fmt(params.vartheta[o, d])}")
    return "\n".join(out) + "\n"


def params_from_text(text: str) -> OptionParams:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != PARAMS_HEADER:
        raise ValueError("not a parameter checkpoint (bad header)")
    meta = {}
    coords = []
    for ln in lines[1:]:
        tok = ln.split()
        if tok[0] in ("theta", "vartheta"):
            coords.append(tok)
        else:
            meta[tok[0]] = tok[1]
    O = int(meta["options"])
    D = int(meta["feature_dim"])
    A = int(meta["actions"])
    theta = np.zeros((O, D, A))
    vartheta = np.zeros((O, D))
    for tok in coords:
        if tok[0] == "theta":
            theta[int(tok[1]), int(tok[2]), int(tok[3])] = float(tok[4])
        else:
            vartheta[int(tok[1]), int(tok[2])] = float(tok[3])
    return OptionParams(
        num_options=O,
        theta=theta,
        vartheta=vartheta,
        epsilon_over_options=float(meta["epsilon"]),
        beta_clamp=float(meta["beta_clamp"]),
    )


def critic_to_text(critic: CriticTables) -> str:
    S, O = critic.q_omega.shape
    out = [
        CRITIC_HEADER,
        f"states {S}",
        f"options {O}",
        f"learning_rate {_fmt(critic.learning_rate)}",
        f"value_style {critic.value_style}",
    ]
    for s in range(S):
        for o in range(O):
            out.append(f"q {s} {o} {_fmt(critic.q_omega[s, o])}")
    return "\n".join(out) + "\n"


def critic_from_text(text: str) -> CriticTables:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CRITIC_HEADER:
        raise ValueError("not a critic checkpoint (bad header)")
    meta = {}
    coords = []
    for ln in lines[1:]:
        tok = ln.split()
        if tok[0] == "q":
            coords.append(tok)
        else:
            meta[tok[0]] = tok[1]
    q = np.zeros((int(meta["states"]), int(meta["options"])))
    for tok in coords:
        q[int(tok[1]), int(tok[2])] = float(tok[3])
    return CriticTables(q_omega=q, learning_rate=float(meta["learning_rate"]),
                        value_style=meta["value_style"])


def save_params(params: OptionParams, path) -> None:
    Path(path).write_text(params_to_text(params))


def load_params(path) -> OptionParams:
    return params_from_text(Path(path).read_text())


def save_critic(critic: CriticTables, path) -> None:
    Path(path).write_text(critic_to_text(critic))


def load_critic(path) -> CriticTables:
    return critic_from_text(Path(path).read_text())
