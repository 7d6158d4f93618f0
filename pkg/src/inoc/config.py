"""Run configuration: defaults per environment, key=value files, overrides.

A config is a flat set of typed keys. Values come from the environment's
defaults, then a config file, then command-line ``--set key=value``
overrides, in that order. Files are line-based ``key=value`` text with
``#`` comments.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path


class ConfigError(Exception):
    pass


ENVS = ("two_state", "four_rooms")
MODES = ("inoc", "inoc_derived", "vanilla")
ENGINES = ("fast", "reference")


@dataclass
class RunConfig:
    env: str = "two_state"
    mode: str = "inoc"
    num_episodes: int = 2000
    num_runs: int = 200
    alpha_theta: float = 1e-9
    alpha_vartheta: float = 0.05
    alpha_eta: float = 0.5
    alpha_phi: float = 0.75
    lam: float = 0.5
    critic_lr: float = 0.15
    epsilon: float = 0.03
    gamma: float = -1.0  # -1 means "use the environment's own discount"
    num_options: int = 2
    seed_base: int = 1
    out_dir: str = "runs"
    delta_omega_form: str = "text"
    value_style: str = "epsilon_greedy_expectation"
    q_bias: float = 10.0  # two-state critic initialization magnitude
    theta_init_std: float = 1.5  # four-rooms policy-logit spread
    engine: str = "fast"
    workers: int = 1


TWO_STATE_DEFAULTS = RunConfig()

FOUR_ROOMS_DEFAULTS = RunConfig(
    env="four_rooms",
    num_episodes=600,
    num_runs=350,
    alpha_theta=0.0025,
    alpha_vartheta=0.0025,
    alpha_eta=0.5,
    alpha_phi=0.75,
    lam=0.5,
    critic_lr=0.5,
    epsilon=0.05,
    num_options=4,
)

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def default_config(env: str) -> RunConfig:
    if env == "two_state":
        return replace(TWO_STATE_DEFAULTS)
    if env == "four_rooms":
        return replace(FOUR_ROOMS_DEFAULTS)
    raise ConfigError(f"unknown env {env!r}; choose from {ENVS}")


def _coerce(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    t = _FIELD_TYPES[key]
    try:
        if t == "int":
            return int(raw)
        if t == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for key {key!r}") from None


def parse_pairs(lines, source="<override>") -> dict:
    out = {}
    for i, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{i}: expected key=value, got {line!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        out[key] = _coerce(key, val)
    return out


def load_config(path=None, overrides=()) -> RunConfig:
    """Assemble a config from defaults, an optional file, and override pairs."""
    pairs: dict = {}
    if path is not None:
        pairs.update(parse_pairs(Path(path).read_text().splitlines(), source=str(path)))
    pairs.update(parse_pairs(overrides))
    env = pairs.get("env", "two_state")
    cfg = default_config(env)
    for key, val in pairs.items():
        setattr(cfg, key, val)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if cfg.env not in ENVS:
        raise ConfigError(f"unknown env {cfg.env!r}")
    if cfg.mode not in MODES:
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    if cfg.engine not in ENGINES:
        raise ConfigError(f"unknown engine {cfg.engine!r}")
    if cfg.delta_omega_form not in ("text", "line12"):
        raise ConfigError(f"unknown delta_omega_form {cfg.delta_omega_form!r}")
    if cfg.value_style not in ("epsilon_greedy_expectation", "max"):
        raise ConfigError(f"unknown value_style {cfg.value_style!r}")
    for key in ("alpha_theta", "alpha_vartheta", "alpha_eta", "alpha_phi", "critic_lr"):
        if not getattr(cfg, key) > 0:
            raise ConfigError(f"{key} must be positive")
    if not (0.0 <= cfg.lam <= 1.0):
        raise ConfigError("lam must lie in [0, 1]")
    if not (0.0 <= cfg.epsilon <= 1.0):
        raise ConfigError("epsilon must lie in [0, 1]")
    if cfg.gamma != -1.0 and not (0.0 <= cfg.gamma < 1.0):
        raise ConfigError("gamma must lie in [0, 1) or be -1 for the env default")
    if cfg.num_runs < 1:
        raise ConfigError("num_runs must be at least 1")
    if cfg.num_episodes < 0:
        raise ConfigError("num_episodes must be nonnegative")
    if cfg.theta_init_std < 0:
        raise ConfigError("theta_init_std must be nonnegative")
    if cfg.env == "two_state" and cfg.num_options != 2:
        raise ConfigError("the two-state experiment defines exactly 2 options")
    if cfg.workers < 1:
        raise ConfigError("workers must be at least 1")


def config_to_text(cfg: RunConfig) -> str:
    lines = [f"{f.name}={getattr(cfg, f.name)!r}" if isinstance(getattr(cfg, f.name), float)
             else f"{f.name}={getattr(cfg, f.name)}" for f in fields(RunConfig)]
    return "\n".join(lines) + "\n"
