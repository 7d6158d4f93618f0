"""Multi-seed execution, aggregation, CSV output, and run comparison.

Each run owns a generator seeded ``seed_base + run_index``, so outputs are
byte-identical for identical configs no matter how runs are scheduled.
Per-run files and the aggregate file are comma-separated text with a header
row; floats print via repr, which round-trips exactly.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fastpath
from .agent import AgentMode, fresh_state, run_episode
from .config import RunConfig, config_to_text
from .envs import four_rooms, four_rooms_initialization, two_state_initialization, two_state_mdp
from .options import one_hot_features

PER_RUN_COLUMNS = ("episode", "return_disc", "return_undisc", "steps", "term_frac", "truncated")
AGGREGATE_COLUMNS = (
    "episode",
    "mean_return_disc",
    "se_return_disc",
    "mean_return_undisc",
    "se_return_undisc",
    "mean_steps",
    "se_steps",
    "mean_term_frac",
)


def build_experiment(cfg: RunConfig, rng: np.random.Generator | None = None):
    """Environment, parameters, critic, and features for one fresh run.

    Four-rooms policy initialization draws from ``rng``, so it must be the
    run's own generator (initialization draws precede trajectory draws in
    the run's stream).
    """
    gamma = None if cfg.gamma == -1.0 else cfg.gamma
    if cfg.env == "two_state":
        mdp = two_state_mdp(gamma=gamma)
        params, critic = two_state_initialization(
            epsilon=cfg.epsilon, critic_lr=cfg.critic_lr, q_bias=cfg.q_bias,
            value_style=cfg.value_style)
    else:
        mdp = four_rooms(gamma=0.99 if gamma is None else gamma)
        params, critic = four_rooms_initialization(
            mdp.num_states, num_options=cfg.num_options, epsilon=cfg.epsilon,
            critic_lr=cfg.critic_lr, value_style=cfg.value_style,
            rng=rng, theta_init_std=cfg.theta_init_std)
    return mdp, params, critic, one_hot_features(mdp.num_states)


def run_single(cfg: RunConfig, run_index: int) -> np.ndarray:
    """One seeded run; rows are (disc, undisc, steps, term_frac, truncated)."""
    rng = np.random.default_rng(cfg.seed_base + run_index)
    mdp, params, critic, fmap = build_experiment(cfg, rng)
    if cfg.engine == "fast":
        return fastpath.run_many(
            mdp, params, critic, fmap, cfg.mode, cfg.num_episodes, rng,
            delta_omega_form=cfg.delta_omega_form, lam=cfg.lam,
            alpha_eta=cfg.alpha_eta, alpha_phi=cfg.alpha_phi,
            alpha_theta=cfg.alpha_theta, alpha_vartheta=cfg.alpha_vartheta)
    mode = AgentMode(cfg.mode)
    state = fresh_state(params, cfg.lam, cfg.alpha_eta, cfg.alpha_phi,
                        cfg.alpha_theta, cfg.alpha_vartheta)
    rows = np.empty((cfg.num_episodes, 5))
    for ep in range(cfg.num_episodes):
        rec = run_episode(mode, mdp, params, critic, state, fmap, rng,
                          episode_index=ep, delta_omega_form=cfg.delta_omega_form)
        rows[ep] = (rec.return_disc, rec.return_undisc, rec.steps,
                    rec.term_update_fraction, float(rec.truncated))
    return rows


def aggregate(per_run: list[np.ndarray]) -> np.ndarray:
    """Per-episode mean and standard error across runs; columns as documented."""
    stack = np.stack(per_run)  # (runs, episodes, 5)
    n = stack.shape[0]
    mean = stack.mean(axis=0)
    if n > 1:
        se = stack.std(axis=0, ddof=1) / np.sqrt(n)
    else:
        se = np.zeros_like(mean)
    episodes = stack.shape[1]
    out = np.empty((episodes, 8))
    out[:, 0] = np.arange(episodes)
    out[:, 1] = mean[:, 0]
    out[:, 2] = se[:, 0]
    out[:, 3] = mean[:, 1]
    out[:, 4] = se[:, 1]
    out[:, 5] = mean[:, 2]
    out[:, 6] = se[:, 2]
    out[:, 7] = mean[:, 3]
    return out


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for j, x in enumerate(row):
            if j == 0:
                cells.append(str(int(x)))
            else:
                cells.append(repr(float(x)))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def run(cfg: RunConfig) -> dict:
    """Execute all runs and write per-run plus aggregate CSV files.

    Returns a dict with file paths and the aggregate array. Scheduling is
    fan-out over seeds; results merge in run-index order regardless of
    completion order.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.workers > 1 and cfg.num_runs > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            per_run = list(pool.map(run_single, [cfg] * cfg.num_runs, range(cfg.num_runs)))
    else:
        per_run = [run_single(cfg, i) for i in range(cfg.num_runs)]
    run_paths = []
    for i, rows in enumerate(per_run):
        path = out_dir / f"run_{i:03d}.csv"
        table = np.column_stack([np.arange(rows.shape[0]), rows])
        _write_csv(path, PER_RUN_COLUMNS, table)
        run_paths.append(path)
    agg = aggregate(per_run) if per_run else np.empty((0, 8))
    agg_path = out_dir / "aggregate.csv"
    _write_csv(agg_path, AGGREGATE_COLUMNS, agg)
    (out_dir / "config.txt").write_text(config_to_text(cfg))
    return {"runs": run_paths, "aggregate": agg_path, "table": agg}


def read_csv(path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    if len(lines) == 1:
        return header, np.empty((0, len(header)))
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return header, data


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    "Trailing moving average; entry i averages the last `window` values up to i."
    if x.size == 0:
        return x.copy()
    c = np.cumsum(np.insert(x, 0, 0.0))
    out = np.empty_like(x, dtype=float)
    for i in range(x.size):
        lo = max(0, i - window + 1)
        out[i] = (c[i + 1] - c[lo]) / (i + 1 - lo)
    return out


def first_crossing(values: np.ndarray, threshold: float) -> int:
    "First index reaching the threshold, or -1 if it never does."
    hits = np.flatnonzero(values >= threshold)
    return int(hits[0]) if hits.size else -1


@dataclass
class CompareSummary:
    window: int
    column: str
    window_means_a: np.ndarray
    window_means_b: np.ndarray
    episodes_to_threshold: tuple[int, int] | None
    plateau_escape: tuple[int, int] | None
    mean_term_frac: tuple[float, float]

    def to_text(self, name_a="A", name_b="B") -> str:
        lines = [f"compare column={self.column} window={self.window}"]
        lines.append(f"mean_term_frac {name_a}={self.mean_term_frac[0]!r} "
                     f"{name_b}={self.mean_term_frac[1]!r}")
        if self.episodes_to_threshold is not None:
            a, b = self.episodes_to_threshold
            lines.append(f"episodes_to_threshold {name_a}={a} {name_b}={b}")
        if self.plateau_escape is not None:
            a, b = self.plateau_escape
            lines.append(f"plateau_escape_episode {name_a}={a} {name_b}={b}")
        lines.append(f"window_start,mean_{name_a},mean_{name_b},diff")
        for i, (ma, mb) in enumerate(zip(self.window_means_a, self.window_means_b)):
            lines.append(f"{i * self.window},{ma!r},{mb!r},{ma - mb!r}")
        return "\n".join(lines) + "\n"


def compare(path_a, path_b, optimum: float | None = None, threshold: float | None = None,
            window: int = 50, column: str = "mean_return_undisc") -> CompareSummary:
    """Summarize two aggregate files: windowed means, thresholds, plateau escape.

    The plateau-escape episode is the first whose `window`-episode moving
    average exceeds 95% of the supplied optimum; -1 marks "never".
    """
    header_a, data_a = read_csv(path_a)
    header_b, data_b = read_csv(path_b)
    if data_a.shape[0] != data_b.shape[0]:
        raise ValueError(
            f"episode count mismatch: {data_a.shape[0]} vs {data_b.shape[0]}")
    col_a = data_a[:, header_a.index(column)]
    col_b = data_b[:, header_b.index(column)]
    frac_a = data_a[:, header_a.index("mean_term_frac")]
    frac_b = data_b[:, header_b.index("mean_term_frac")]
    nwin = data_a.shape[0] // window
    wa = np.array([col_a[i * window:(i + 1) * window].mean() for i in range(nwin)])
    wb = np.array([col_b[i * window:(i + 1) * window].mean() for i in range(nwin)])
    to_thresh = None
    if threshold is not None:
        to_thresh = (first_crossing(col_a, threshold), first_crossing(col_b, threshold))
    escape = None
    if optimum is not None:
        ma = moving_average(col_a, window)
        mb = moving_average(col_b, window)
        bar = 0.95 * optimum
        escape = (first_crossing(ma, bar), first_crossing(mb, bar))
    return CompareSummary(
        window=window,
        column=column,
        window_means_a=wa,
        window_means_b=wb,
        episodes_to_threshold=to_thresh,
        plateau_escape=escape,
        mean_term_frac=(float(frac_a.mean()) if frac_a.size else 0.0,
                        float(frac_b.mean()) if frac_b.size else 0.0),
    )
