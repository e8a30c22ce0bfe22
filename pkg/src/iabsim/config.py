"""Experiment configuration: dataclasses plus a strict INI-style file loader.

The config file has one section per parameter group ([network], [channel],
[episode], [agent], [run]). Unknown sections or keys are hard errors so that
a typo in a hyper-parameter name cannot silently fall back to a default.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from iabsim.channel import ChannelParams
from iabsim.env import EpisodeConfig
from iabsim.rates import QosSpec
from iabsim.topology import NetworkConfig

AGENT_KINDS = ("ddqn", "actor_critic", "full_reuse", "fixed_orthogonal", "oracle", "random")


class ConfigError(ValueError):
    pass


@dataclass
class AgentConfig:
    kind: str = "actor_critic"
    hidden: tuple[int, ...] = (500, 1000, 500)
    epsilon: float = 0.9
    epsilon_decay: float = 0.9995
    epsilon_min: float = 0.01
    lr: float = 1e-4
    tau: float = 0.01
    batch_n: int = 32
    buffer_capacity: int = 10_000
    target_sync_period: int = 100
    action_cap: int = 65_536
    store_relaxed: bool = True
    optimizer: str = "sgd"
    grad_clip: float = 0.0

    def __post_init__(self):
        if self.kind not in AGENT_KINDS:
            raise ConfigError(f"unknown agent kind {self.kind!r}, expected one of {AGENT_KINDS}")


@dataclass
class RunConfig:
    episodes: int = 300
    seeds: tuple[int, ...] = (0,)
    out_dir: str = "runs/out"
    snapshots: bool = False
    checkpoint_every: int = 0  # episodes between checkpoints; 0 = final only


@dataclass
class ExperimentConfig:
    network: NetworkConfig
    channel: ChannelParams = field(default_factory=ChannelParams)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    run: RunConfig = field(default_factory=RunConfig)


def _parse_int_tuple(raw: str) -> tuple[int, ...]:
    return tuple(int(part.strip()) for part in raw.split(",") if part.strip())


_BOOLS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _convert(section: str, key: str, raw: str, target_type):
    try:
        if target_type is bool:
            return _BOOLS[raw.strip().lower()]
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        if target_type is str:
            return raw.strip()
        if target_type == "int_tuple":
            return _parse_int_tuple(raw)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None
    raise ConfigError(f"internal: no converter for {target_type}")


# section -> key -> type tag; "omega" is special-cased into a QosSpec below
_SCHEMA = {
    "network": {
        "n_iab": int,
        "n_chan": int,
        "iab_radius": float,
        "ue_radius": float,
        "speed_max": float,
        "step_duration": float,
        "min_distance": float,
    },
    "channel": {
        "mbs_pl_a": float,
        "mbs_pl_b": float,
        "iab_pl_a": float,
        "iab_pl_b": float,
        "bandwidth_hz": float,
        "noise_figure_db": float,
        "tx_power_mbs_dbm": float,
        "tx_power_iab_dbm": float,
        "self_interference_db": float,
        "noise_per_subchannel": bool,
        "unweighted_interference": bool,
    },
    "episode": {
        "horizon": int,
        "gamma": float,
        "omega": float,
        "c_floor": float,
        "qos_penalty": float,
    },
    "agent": {
        "kind": str,
        "hidden": "int_tuple",
        "epsilon": float,
        "epsilon_decay": float,
        "epsilon_min": float,
        "lr": float,
        "tau": float,
        "batch_n": int,
        "buffer_capacity": int,
        "target_sync_period": int,
        "action_cap": int,
        "store_relaxed": bool,
        "optimizer": str,
        "grad_clip": float,
    },
    "run": {
        "episodes": int,
        "seeds": "int_tuple",
        "out_dir": str,
        "snapshots": bool,
        "checkpoint_every": int,
    },
}


def load_config(path) -> ExperimentConfig:
    """Parse and validate a config file; raises ConfigError on any problem."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[section][key] = _convert(section, key, raw, _SCHEMA[section][key])

    net_kv = values.get("network", {})
    for required in ("n_iab", "n_chan"):
        if required not in net_kv:
            raise ConfigError(f"[network] {required} is required")
    try:
        network = NetworkConfig(**net_kv)
        channel = ChannelParams(**values.get("channel", {}))
        ep_kv = dict(values.get("episode", {}))
        omega = ep_kv.pop("omega", 5.0)
        episode = EpisodeConfig(qos=QosSpec.uniform(network.n_iab, omega), **ep_kv)
        agent = AgentConfig(**values.get("agent", {}))
        run = RunConfig(**values.get("run", {}))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return ExperimentConfig(network=network, channel=channel, episode=episode, agent=agent, run=run)
