"""Experiment orchestration: seeded training/eval runs, CSV metrics, the
policy-gain metric and the policy-improvement check.

Every run is a pure function of (config, seed list): sub-streams for the
environment and the agent are derived per seed, and metric files carry no
timestamps, so repeated runs are byte-identical. Wall time goes to a separate
run-info file instead of the metrics CSV.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from iabsim.actor_critic import ActorCriticAgent
from iabsim.baselines import (
    exhaustive_oracle,
    fixed_orthogonal,
    full_reuse,
    random_feasible,
)
from iabsim.config import ExperimentConfig
from iabsim.ddqn import DoubleDqnAgent
from iabsim.env import SpectrumEnv, Transition, encode_action
from iabsim.rates import Allocation
from iabsim import mlp

SCHEMA_VERSION = "iabsim-metrics-v1"
_EVAL_STREAM_TAG = 0xE7A1  # keeps eval env streams disjoint from training


class CheckpointError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# rng / construction helpers


def _seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    env_ss, agent_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(agent_ss)


def _make_env(cfg: ExperimentConfig, rng: np.random.Generator) -> SpectrumEnv:
    return SpectrumEnv(cfg.network, cfg.channel, cfg.episode, rng=rng)


def _make_agent(cfg: ExperimentConfig, rng: np.random.Generator):
    a = cfg.agent
    common = dict(
        n_iab=cfg.network.n_iab,
        n_chan=cfg.network.n_chan,
        hidden=tuple(a.hidden),
        gamma=cfg.episode.gamma,
        epsilon=a.epsilon,
        epsilon_decay=a.epsilon_decay,
        epsilon_min=a.epsilon_min,
        lr=a.lr,
        batch_n=a.batch_n,
        buffer_capacity=a.buffer_capacity,
        optimizer=a.optimizer,
        grad_clip=a.grad_clip,
        rng=rng,
    )
    if a.kind == "ddqn":
        return DoubleDqnAgent(
            target_sync_period=a.target_sync_period, action_cap=a.action_cap, **common
        )
    if a.kind == "actor_critic":
        return ActorCriticAgent(tau=a.tau, store_relaxed=a.store_relaxed, **common)
    raise ValueError(f"{a.kind!r} is not a trainable agent kind")


def make_policy(kind: str, cfg: ExperimentConfig, rng: np.random.Generator, agent=None):
    """Return a callable (obs, env) -> Allocation for any agent/baseline kind.
    Learned kinds act greedily and need a constructed/restored ``agent``."""
    n, m = cfg.network.n_iab, cfg.network.n_chan
    if kind == "full_reuse":
        alloc = full_reuse(n, m)
        return lambda obs, env: alloc
    if kind == "fixed_orthogonal":
        alloc = fixed_orthogonal(n, m)
        return lambda obs, env: alloc
    if kind == "random":
        return lambda obs, env: random_feasible(n, m, rng)
    if kind == "oracle":
        cap = cfg.agent.action_cap
        c_floor = cfg.episode.c_floor

        def oracle_policy(obs, env):
            return exhaustive_oracle(
                env.channel_state, cfg.channel, n, m, cap=cap, c_floor=c_floor
            ).best_alloc

        return oracle_policy
    if kind == "ddqn":
        return lambda obs, env: encode_action(agent.greedy_action(obs), n, m)
    if kind == "actor_critic":
        return lambda obs, env: agent.greedy(obs)[1]
    raise ValueError(f"unknown policy kind {kind!r}")


# ---------------------------------------------------------------------------
# metrics / snapshot CSV


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    return "" if math.isnan(v) else repr(v)


def _metrics_header(n_iab: int) -> list[str]:
    cols = ["seed", "episode", "step", "reward"]
    cols += [f"rate_{j}" for j in range(1 + n_iab)]
    cols += [f"qos_{j}" for j in range(1 + n_iab)]
    cols += ["epsilon", "loss"]
    return cols


def _write_metrics(path: Path, rows: list[list], cfg: ExperimentConfig) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema {SCHEMA_VERSION} n_iab={cfg.network.n_iab} n_chan={cfg.network.n_chan}\n")
        writer = csv.writer(fh)
        writer.writerow(_metrics_header(cfg.network.n_iab))
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_metrics(path) -> tuple[list[str], list[list[str]]]:
    """Read back a metrics CSV (schema comment skipped)."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def _snapshot_rows(seed: int, episode: int, step: int, alloc: Allocation) -> list[list]:
    rows = []
    n, m = alloc.z.shape
    for mm in range(m):
        owner = int(np.argmax(alloc.x[:, mm]))
        assignee = "u0" if owner == 0 else f"b{owner}"
        rows.append([seed, episode, step, "mbs", mm, assignee])
    for l in range(n):
        for mm in range(m):
            rows.append([seed, episode, step, f"iab{l + 1}", mm, f"u{l + 1}" if alloc.z[l, mm] else "-"])
    return rows


def _write_snapshots(path: Path, rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema {SCHEMA_VERSION}-alloc\n")
        writer = csv.writer(fh)
        writer.writerow(["seed", "episode", "step", "bs", "subchannel", "assignee"])
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# training


def _checkpoint_nets(agent) -> dict[str, mlp.MlpParams]:
    if isinstance(agent, DoubleDqnAgent):
        return {"q_train": agent.q_train, "q_target": agent.q_target}
    return {
        "actor": agent.actor,
        "critic": agent.critic,
        "actor_target": agent.actor_target,
        "critic_target": agent.critic_target,
    }


def _save_checkpoint(agent, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for name, params in _checkpoint_nets(agent).items():
        mlp.save_params(params, directory / f"{name}.npz")


def _restore_agent(cfg: ExperimentConfig, seed: int, checkpoint_root: Path):
    """Rebuild a greedy agent from a per-seed checkpoint directory."""
    kind = cfg.agent.kind
    ckpt = Path(checkpoint_root) / f"seed{seed}"
    if not ckpt.is_dir():
        raise CheckpointError(f"no checkpoint directory {ckpt}")
    _, agent_rng = _seed_streams(seed)
    agent = _make_agent(cfg, agent_rng)
    agent.epsilon = 0.0
    try:
        for name in _checkpoint_nets(agent):
            loaded = mlp.load_params(ckpt / f"{name}.npz")
            current = getattr(agent, name)
            if loaded.layer_sizes != current.layer_sizes or loaded.head != current.head:
                raise CheckpointError(
                    f"checkpoint {name} shape {loaded.layer_sizes} does not match "
                    f"configured network {current.layer_sizes}"
                )
            setattr(agent, name, loaded)
    except FileNotFoundError as exc:
        raise CheckpointError(str(exc)) from None
    return agent


def _train_one_seed(cfg: ExperimentConfig, seed: int) -> tuple[list[list], list[list], object]:
    env_rng, agent_rng = _seed_streams(seed)
    env = _make_env(cfg, env_rng)
    kind = cfg.agent.kind
    trainable = kind in ("ddqn", "actor_critic")
    agent = _make_agent(cfg, agent_rng) if trainable else None
    policy = None if trainable else make_policy(kind, cfg, agent_rng)

    n = cfg.network.n_iab
    horizon = cfg.episode.horizon
    rows: list[list] = []
    snaps: list[list] = []
    for episode in range(cfg.run.episodes):
        obs = env.reset()
        for step in range(1, horizon + 1):
            loss = None
            if kind == "ddqn":
                a_idx = agent.select_action(obs)
                alloc = encode_action(a_idx, n, cfg.network.n_chan)
            elif kind == "actor_critic":
                relaxed, alloc = agent.act(obs)
            else:
                alloc = policy(obs, env)
            obs_next, reward, rv = env.step(alloc)
            if kind == "ddqn":
                agent.buffer.push(Transition(obs, a_idx, reward, obs_next))
                if len(agent.buffer) >= agent.batch_n:
                    loss = agent.train_step()
            elif kind == "actor_critic":
                agent.remember(obs, relaxed, alloc, reward, obs_next)
                if len(agent.buffer) >= agent.batch_n:
                    loss = agent.train_step()
                agent.soft_sync()
            rows.append(
                [seed, episode, step, reward]
                + [float(r) for r in rv.rates]
                + [int(b) for b in obs_next]
                + [agent.epsilon if agent else None, loss]
            )
            if cfg.run.snapshots:
                snaps.extend(_snapshot_rows(seed, episode, step, alloc))
            obs = obs_next
        if agent is not None:
            agent.end_episode()
    return rows, snaps, agent


def run_train(cfg: ExperimentConfig) -> Path:
    """Train (or roll out, for static kinds) every configured seed; write
    per-seed and merged metric CSVs plus final checkpoints. Returns the
    merged metrics path."""
    out = Path(cfg.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    all_rows: list[list] = []
    all_snaps: list[list] = []
    for seed in cfg.run.seeds:
        rows, snaps, agent = _train_one_seed(cfg, seed)
        _write_metrics(out / f"metrics_seed{seed}.csv", rows, cfg)
        all_rows.extend(rows)
        all_snaps.extend(snaps)
        if agent is not None:
            _save_checkpoint(agent, out / "checkpoints" / f"seed{seed}")
    merged = out / "metrics.csv"
    _write_metrics(merged, all_rows, cfg)
    if cfg.run.snapshots:
        _write_snapshots(out / "allocations.csv", all_snaps)
    with open(out / "runinfo.txt", "w") as fh:
        fh.write(f"agent={cfg.agent.kind}\nseeds={','.join(map(str, cfg.run.seeds))}\n")
        fh.write(f"episodes={cfg.run.episodes}\nhorizon={cfg.episode.horizon}\n")
        fh.write(f"wall_seconds={time.perf_counter() - started:.3f}\n")
    return merged


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalSummary:
    kind: str
    seeds: tuple[int, ...]
    episodes: int
    horizon: int
    mean_reward: float
    per_seed_mean_reward: list[float]
    mean_rates: np.ndarray
    qos_ratio: float


def _eval_env_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, _EVAL_STREAM_TAG]))


def run_eval(
    cfg: ExperimentConfig,
    checkpoint: Path | str | None = None,
    episodes: int | None = None,
) -> EvalSummary:
    """Greedy rollouts of the configured policy. Environment streams depend
    only on (seed, fixed eval tag), so evaluations of different policies over
    the same seeds see identical channel/mobility sequences."""
    kind = cfg.agent.kind
    episodes = episodes if episodes is not None else cfg.run.episodes
    horizon = cfg.episode.horizon
    rewards_by_seed: list[float] = []
    rate_sum = np.zeros(1 + cfg.network.n_iab)
    qos_hits = 0
    total_steps = 0
    for seed in cfg.run.seeds:
        if kind in ("ddqn", "actor_critic"):
            if checkpoint is None:
                raise CheckpointError(f"agent kind {kind!r} needs a checkpoint to evaluate")
            agent = _restore_agent(cfg, seed, Path(checkpoint))
            policy = make_policy(kind, cfg, agent.rng, agent=agent)
        else:
            _, agent_rng = _seed_streams(seed)
            policy = make_policy(kind, cfg, agent_rng)
        env = SpectrumEnv(cfg.network, cfg.channel, cfg.episode, rng=_eval_env_rng(seed))
        seed_reward = 0.0
        for _ in range(episodes):
            obs = env.reset()
            for _ in range(horizon):
                alloc = policy(obs, env)
                obs, reward, rv = env.step(alloc)
                seed_reward += reward
                rate_sum += rv.rates
                qos_hits += int(obs.sum())
                total_steps += 1
        rewards_by_seed.append(seed_reward / (episodes * horizon))
    return EvalSummary(
        kind=kind,
        seeds=tuple(cfg.run.seeds),
        episodes=episodes,
        horizon=horizon,
        mean_reward=float(np.mean(rewards_by_seed)),
        per_seed_mean_reward=rewards_by_seed,
        mean_rates=rate_sum / total_steps,
        qos_ratio=qos_hits / (total_steps * (1 + cfg.network.n_iab)),
    )


def write_summary(summary: EvalSummary, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema {SCHEMA_VERSION}-summary\n")
        writer = csv.writer(fh)
        header = ["kind", "seed", "episodes", "horizon", "mean_reward"]
        header += [f"mean_rate_{j}" for j in range(len(summary.mean_rates))]
        header += ["qos_ratio"]
        writer.writerow(header)
        for seed, mr in zip(summary.seeds, summary.per_seed_mean_reward):
            writer.writerow(
                [summary.kind, seed, summary.episodes, summary.horizon, _fmt(mr)]
                + [""] * len(summary.mean_rates)
                + [""]
            )
        writer.writerow(
            [summary.kind, "all", summary.episodes, summary.horizon, _fmt(summary.mean_reward)]
            + [_fmt(r) for r in summary.mean_rates]
            + [_fmt(summary.qos_ratio)]
        )


def compute_gain(policy_summary: EvalSummary, fixed_summary: EvalSummary) -> float:
    """Relative mean sum-log-rate gain of one policy over a fixed one:
    (mean_policy - mean_fixed) / mean_fixed.

    Positive means the policy beat the fixed strategy when the fixed mean is
    positive; with a negative fixed mean the ratio's sign flips, so always
    report the raw means next to the gain (the CLI does).
    """
    if policy_summary.seeds != fixed_summary.seeds:
        raise ValueError("summaries cover different seeds")
    if (policy_summary.episodes, policy_summary.horizon) != (
        fixed_summary.episodes,
        fixed_summary.horizon,
    ):
        raise ValueError("summaries cover different run shapes")
    if fixed_summary.mean_reward == 0.0:
        raise ValueError("fixed policy mean is zero; gain undefined")
    return (policy_summary.mean_reward - fixed_summary.mean_reward) / fixed_summary.mean_reward


# ---------------------------------------------------------------------------
# policy-improvement check


@dataclass
class ImprovementResult:
    passed: bool
    mean_improved: float
    mean_baseline: float
    mean_diff: float
    stderr_diff: float
    episodes: int


def _discounted_return(policy, env: SpectrumEnv, horizon: int, gamma: float) -> float:
    obs = env.reset()
    total = 0.0
    weight = 1.0
    for _ in range(horizon):
        alloc = policy(obs, env)
        obs, reward, _ = env.step(alloc)
        total += weight * reward
        weight *= gamma
    return total


def policy_improvement_check(
    cfg: ExperimentConfig,
    baseline_kind: str = "full_reuse",
    improved_kind: str = "oracle",
    episodes: int = 100,
    horizon: int | None = None,
    checkpoint: Path | str | None = None,
) -> ImprovementResult:
    """Monte-Carlo check that the improved policy's expected discounted
    return is no worse than the baseline's.

    Both policies face identical channel/mobility draws (common random
    numbers), so the paired per-episode differences carry the signal. Passes
    when mean(V_improved) >= mean(V_baseline) - 2 * stderr(diff).
    """
    horizon = horizon if horizon is not None else cfg.episode.horizon
    gamma = cfg.episode.gamma
    base_seed = cfg.run.seeds[0]

    def returns_for(kind: str) -> np.ndarray:
        _, policy_rng = _seed_streams(base_seed + 1)
        if kind in ("ddqn", "actor_critic"):
            if checkpoint is None:
                raise CheckpointError(f"agent kind {kind!r} needs a checkpoint")
            agent = _restore_agent(cfg, base_seed, Path(checkpoint))
            policy = make_policy(kind, cfg, policy_rng, agent=agent)
        else:
            policy = make_policy(kind, cfg, policy_rng)
        vals = np.empty(episodes)
        for k in range(episodes):
            env_rng = np.random.default_rng(np.random.SeedSequence([base_seed, k]))
            env = SpectrumEnv(cfg.network, cfg.channel, cfg.episode, rng=env_rng)
            vals[k] = _discounted_return(policy, env, horizon, gamma)
        return vals

    v_base = returns_for(baseline_kind)
    v_impr = returns_for(improved_kind)
    diff = v_impr - v_base
    stderr = float(diff.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    mean_diff = float(diff.mean())
    return ImprovementResult(
        passed=mean_diff >= -2.0 * stderr,
        mean_improved=float(v_impr.mean()),
        mean_baseline=float(v_base.mean()),
        mean_diff=mean_diff,
        stderr_diff=stderr,
        episodes=episodes,
    )
