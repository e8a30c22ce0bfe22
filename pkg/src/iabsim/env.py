"""Episodic MDP over the network simulator.

The observation is the per-UE-group QoS bit vector (no channel state). The
channel and UE mobility evolve independently of the chosen actions, so two
runs seeded identically see the same channel sequence whatever they do --
this is what makes per-step exhaustive search a valid optimal policy and is
relied on by the comparison harness.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from iabsim.channel import ChannelParams, ChannelState, draw_small_scale, gain_tensor
from iabsim.rates import (
    Allocation,
    DEFAULT_RATE_FLOOR,
    QosSpec,
    RateVector,
    compute_rates,
    qos_bits,
    require_valid,
    utility,
)
from iabsim.topology import Layout, NetworkConfig, deploy, step_mobility


@dataclass
class EpisodeConfig:
    horizon: int = 500
    gamma: float = 0.9
    qos: QosSpec | None = None  # defaults to a uniform 5.0 requirement
    c_floor: float = DEFAULT_RATE_FLOOR
    qos_penalty: float = 0.0    # optional per-unsatisfied-group reward penalty

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")


@dataclass
class Transition:
    s: np.ndarray
    a: object  # action index (int) or stored relaxed action matrix
    r: float
    s_next: np.ndarray


def action_space_size(n_iab: int, n_chan: int) -> int:
    """Joint discrete action count: (1+L)^M one-hot schedules times 2^(L*M)
    relay toggles. Python int, may be astronomically large."""
    return (1 + n_iab) ** n_chan * 2 ** (n_iab * n_chan)


def encode_action(idx: int, n_iab: int, n_chan: int) -> Allocation:
    """Mixed-radix decoding of a joint action index into matrices.

    The high part holds M base-(1+L) digits (the one-hot row per column of
    x, least significant digit = column 0); the low L*M bits are z row-major.
    Index 0 is therefore "every subchannel to the macro UE group, all relay
    toggles off".
    """
    size = action_space_size(n_iab, n_chan)
    if not 0 <= idx < size:
        raise ValueError(f"action index {idx} out of range [0, {size})")
    z_bits = n_iab * n_chan
    z_val = idx & ((1 << z_bits) - 1)
    x_val = idx >> z_bits
    x = np.zeros((1 + n_iab, n_chan), dtype=np.int64)
    for m in range(n_chan):
        x[x_val % (1 + n_iab), m] = 1
        x_val //= 1 + n_iab
    z = np.zeros((n_iab, n_chan), dtype=np.int64)
    for l in range(n_iab):
        for m in range(n_chan):
            z[l, m] = (z_val >> (l * n_chan + m)) & 1
    return Allocation(x=x, z=z)


def decode_action(alloc: Allocation, n_iab: int, n_chan: int) -> int:
    """Inverse of encode_action; rejects infeasible matrices."""
    require_valid(alloc, n_iab, n_chan)
    x_val = 0
    for m in reversed(range(n_chan)):
        x_val = x_val * (1 + n_iab) + int(np.argmax(alloc.x[:, m]))
    z_val = 0
    for l in range(n_iab):
        for m in range(n_chan):
            if alloc.z[l, m]:
                z_val |= 1 << (l * n_chan + m)
    return (x_val << (n_iab * n_chan)) | z_val


def discretize(relaxed: np.ndarray, n_iab: int, n_chan: int) -> Allocation:
    """Project a relaxed (2L+1) x M action onto a feasible binary allocation.

    Each x column goes one-hot at its argmax (ties break to the lowest row);
    z entries round up at 0.5.
    """
    relaxed = np.asarray(relaxed, dtype=float)
    if relaxed.shape != (2 * n_iab + 1, n_chan):
        raise ValueError(f"relaxed action shape {relaxed.shape} != {(2 * n_iab + 1, n_chan)}")
    x = np.zeros((1 + n_iab, n_chan), dtype=np.int64)
    rows = np.argmax(relaxed[: 1 + n_iab, :], axis=0)
    x[rows, np.arange(n_chan)] = 1
    z = (relaxed[1 + n_iab :, :] >= 0.5).astype(np.int64)
    return Allocation(x=x, z=z)


class SpectrumEnv:
    """Simulator wrapped as an episodic decision process.

    One env step = one coherence interval: evaluate the chosen allocation on
    the current channel, then move the UEs and redraw fading for the next
    interval. Single-owner mutable object; run independent instances for
    parallel seeds.
    """

    def __init__(
        self,
        network: NetworkConfig,
        channel: ChannelParams,
        episode: EpisodeConfig | None = None,
        seed: int | None = None,
        rng: np.random.Generator | None = None,
    ):
        self.network = network
        self.channel_params = channel
        ep = episode if episode is not None else EpisodeConfig()
        if ep.qos is None:
            ep = replace(ep, qos=QosSpec.uniform(network.n_iab))
        elif ep.qos.omega.shape != (1 + network.n_iab,):
            raise ValueError(
                f"qos spec has {ep.qos.omega.shape[0]} entries, network has "
                f"{1 + network.n_iab} UE groups"
            )
        self.episode = ep
        if rng is not None:
            self._rng = rng
        else:
            self._rng = np.random.default_rng(seed)
        self._layout: Layout | None = None
        self._ch: ChannelState | None = None
        self._t = 0

    @property
    def n_iab(self) -> int:
        return self.network.n_iab

    @property
    def n_chan(self) -> int:
        return self.network.n_chan

    @property
    def t(self) -> int:
        return self._t

    @property
    def layout(self) -> Layout:
        self._require_reset()
        return self._layout

    @property
    def channel_state(self) -> ChannelState:
        """Gains the next step() call will be evaluated on."""
        self._require_reset()
        return self._ch

    def _require_reset(self):
        if self._ch is None:
            raise RuntimeError("call reset() first")

    def _draw_channel(self):
        fading = draw_small_scale(self._rng, self.n_iab, self.n_chan)
        self._ch = gain_tensor(
            self._layout, self.channel_params, fading, self.network.min_distance
        )

    def reset(self, seed: int | None = None) -> np.ndarray:
        """Redeploy the network and return the initial observation.

        Before any action is taken no subchannel carries traffic, so every
        rate is zero and the initial QoS vector is all zeros.
        """
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._layout = deploy(self.network, self._rng)
        self._draw_channel()
        self._t = 1
        return np.zeros(1 + self.n_iab)

    def step(self, alloc: Allocation) -> tuple[np.ndarray, float, RateVector]:
        """Apply an allocation for one coherence interval.

        Returns (next observation, reward, rate vector). Infeasible
        allocations raise InvalidAllocation and leave the state untouched.
        """
        self._require_reset()
        if self._t > self.episode.horizon:
            raise RuntimeError("episode horizon exhausted; call reset()")
        require_valid(alloc, self.n_iab, self.n_chan)

        rv = compute_rates(alloc, self._ch, self.channel_params)
        reward = utility(rv, self.episode.c_floor)
        bits = qos_bits(rv, self.episode.qos)
        if self.episode.qos_penalty:
            reward -= self.episode.qos_penalty * float((1.0 - bits).sum())

        # exogenous evolution: mobility and fading advance regardless of the action
        self._layout = step_mobility(self._layout, self.network, self._rng)
        self._draw_channel()
        self._t += 1
        return bits, reward, rv
