"""Command-line front end.

Subcommands: train, eval, oracle, gain, improve-check. Exit codes: 0 ok,
1 config error, 2 runtime error, 3 check failed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from iabsim.baselines import enumerate_allocations, evaluate_allocations
from iabsim.config import ConfigError, load_config
from iabsim.env import SpectrumEnv
from iabsim import harness

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_CHECK_FAILED = 3


def _parse_seed_list(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in raw.split(",") if s.strip())
    except ValueError:
        raise ConfigError(f"bad seed list {raw!r}") from None


def _load(args) -> "ExperimentConfig":
    cfg = load_config(args.config)
    if getattr(args, "seed", None):
        cfg.run.seeds = _parse_seed_list(args.seed)
    if getattr(args, "episodes", None):
        cfg.run.episodes = args.episodes
    if getattr(args, "out", None):
        cfg.run.out_dir = args.out
    return cfg


def _add_common(p: argparse.ArgumentParser, checkpoint: bool = False):
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--seed", help="comma-separated seed list override")
    p.add_argument("--out", help="output directory override")
    p.add_argument("--episodes", type=int, help="episode count override")
    if checkpoint:
        p.add_argument("--checkpoint", help="checkpoint directory (from a train run)")


def cmd_train(args) -> int:
    cfg = _load(args)
    path = harness.run_train(cfg)
    print(f"metrics written to {path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load(args)
    summary = harness.run_eval(cfg, checkpoint=args.checkpoint)
    out = Path(cfg.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_summary(summary, out / "summary.csv")
    print(
        f"{summary.kind}: mean reward {summary.mean_reward:.4f}, "
        f"qos ratio {summary.qos_ratio:.3f}, "
        f"mean rates {np.array2string(summary.mean_rates, precision=3)}"
    )
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _load(args)
    n, m = cfg.network.n_iab, cfg.network.n_chan
    env = SpectrumEnv(cfg.network, cfg.channel, cfg.episode, seed=cfg.run.seeds[0])
    env.reset()
    x_all, z_all = enumerate_allocations(n, m)
    utilities = evaluate_allocations(
        x_all, z_all, env.channel_state, cfg.channel, cfg.episode.c_floor
    )
    out = Path(cfg.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "oracle.csv"
    with open(path, "w", newline="") as fh:
        fh.write("action_index,utility\n")
        for idx, value in enumerate(utilities):
            fh.write(f"{idx},{value!r}\n")
    best = int(np.argmax(utilities))
    print(f"{len(utilities)} allocations evaluated; best index {best} "
          f"utility {utilities[best]:.6f}; table in {path}")
    return EXIT_OK


def cmd_gain(args) -> int:
    cfg = _load(args)
    if cfg.agent.kind not in ("ddqn", "actor_critic"):
        raise ConfigError("gain expects a trained agent kind in [agent] kind")
    policy_summary = harness.run_eval(cfg, checkpoint=args.checkpoint)
    results = [f"{cfg.agent.kind} mean sum-log-rate {policy_summary.mean_reward:.4f}"]
    for fixed_kind in ("fixed_orthogonal", "full_reuse"):
        fixed_cfg = replace(cfg, agent=replace(cfg.agent, kind=fixed_kind))
        fixed_summary = harness.run_eval(fixed_cfg)
        gain = harness.compute_gain(policy_summary, fixed_summary)
        results.append(
            f"vs {fixed_kind}: gain {gain:.4f} (fixed mean {fixed_summary.mean_reward:.4f})"
        )
    print("; ".join(results))
    return EXIT_OK


def cmd_improve_check(args) -> int:
    cfg = _load(args)
    result = harness.policy_improvement_check(
        cfg,
        baseline_kind=args.baseline,
        improved_kind=args.improved,
        episodes=args.episodes or 100,
        checkpoint=args.checkpoint,
    )
    print(
        f"improved {args.improved} mean V {result.mean_improved:.4f} vs "
        f"baseline {args.baseline} mean V {result.mean_baseline:.4f} "
        f"(diff {result.mean_diff:.4f} +- {result.stderr_diff:.4f}): "
        f"{'PASS' if result.passed else 'FAIL'}"
    )
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iabsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an agent or roll out a static policy")
    _add_common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="greedy evaluation of a policy")
    _add_common(p, checkpoint=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("oracle", help="dump the exhaustive utility table for one frozen channel")
    _add_common(p)
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("gain", help="relative gain of a trained agent over the static baselines")
    _add_common(p, checkpoint=True)
    p.set_defaults(fn=cmd_gain)

    p = sub.add_parser("improve-check", help="Monte-Carlo policy-improvement comparison")
    _add_common(p, checkpoint=True)
    p.add_argument("--baseline", default="full_reuse")
    p.add_argument("--improved", default="oracle")
    p.set_defaults(fn=cmd_improve_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
