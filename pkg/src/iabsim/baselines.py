"""Static allocation policies and the exhaustive-search reference.

The exhaustive search enumerates the full joint action space, so it is only
usable at desk scale; it is the ground truth the learned policies are
measured against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from iabsim.channel import (
    ChannelParams,
    ChannelState,
    dbm_to_watt,
    db_to_linear,
    noise_power_dbm,
)
from iabsim.env import action_space_size, encode_action
from iabsim.rates import Allocation, DEFAULT_RATE_FLOOR


@dataclass
class OracleResult:
    best_alloc: Allocation
    best_utility: float
    evaluated_count: int
    best_index: int


def full_reuse(n_iab: int, n_chan: int) -> Allocation:
    """Every relay transmits on every subchannel; the macro station hands out
    its subchannels round-robin over the first-tier receivers."""
    x = np.zeros((1 + n_iab, n_chan), dtype=np.int64)
    for m in range(n_chan):
        x[m % (1 + n_iab), m] = 1
    z = np.ones((n_iab, n_chan), dtype=np.int64)
    return Allocation(x=x, z=z)


def fixed_orthogonal(n_iab: int, n_chan: int) -> Allocation:
    """Static orthogonal split: the band is carved into 1+2L contiguous
    blocks (earlier blocks larger when uneven), one for the macro UE group,
    one per backhaul, one per relay access link. Subchannels in relay access
    blocks still need a first-tier owner, so they go to the macro UE group.
    """
    n_blocks = 1 + 2 * n_iab
    base, rem = divmod(n_chan, n_blocks)
    sizes = [base + 1 if b < rem else base for b in range(n_blocks)]
    x = np.zeros((1 + n_iab, n_chan), dtype=np.int64)
    z = np.zeros((n_iab, n_chan), dtype=np.int64)
    start = 0
    for b, size in enumerate(sizes):
        stop = start + size
        if b <= n_iab:
            x[b, start:stop] = 1
        else:
            z[b - n_iab - 1, start:stop] = 1
        start = stop
    uncovered = x.sum(axis=0) == 0
    x[0, uncovered] = 1
    return Allocation(x=x, z=z)


def random_feasible(n_iab: int, n_chan: int, rng: np.random.Generator) -> Allocation:
    """Uniform random one-hot per macro column, fair-coin relay toggles."""
    x = np.zeros((1 + n_iab, n_chan), dtype=np.int64)
    rows = rng.integers(0, 1 + n_iab, size=n_chan)
    x[rows, np.arange(n_chan)] = 1
    z = rng.integers(0, 2, size=(n_iab, n_chan)).astype(np.int64)
    return Allocation(x=x, z=z)


@lru_cache(maxsize=8)
def enumerate_allocations(n_iab: int, n_chan: int) -> tuple[np.ndarray, np.ndarray]:
    """All feasible allocations stacked along axis 0, in action-index order.
    Returns read-only float arrays (x_all: (A, 1+L, M), z_all: (A, L, M))."""
    size = action_space_size(n_iab, n_chan)
    x_all = np.empty((size, 1 + n_iab, n_chan))
    z_all = np.empty((size, n_iab, n_chan))
    for idx in range(size):
        alloc = encode_action(idx, n_iab, n_chan)
        x_all[idx] = alloc.x
        z_all[idx] = alloc.z
    x_all.setflags(write=False)
    z_all.setflags(write=False)
    return x_all, z_all


def evaluate_allocations(
    x_all: np.ndarray,
    z_all: np.ndarray,
    ch: ChannelState,
    params: ChannelParams,
    c_floor: float = DEFAULT_RATE_FLOOR,
) -> np.ndarray:
    """Vectorized utility for a stack of allocations on one frozen channel.

    Mirrors rates.compute_rates / rates.utility exactly (there is an
    equivalence test); used so per-step exhaustive search stays tractable.
    """
    n, m = ch.n_iab, ch.n_chan
    g = ch.gains
    p0 = dbm_to_watt(params.tx_power_mbs_dbm)
    pi = dbm_to_watt(params.tx_power_iab_dbm)
    xi = db_to_linear(params.self_interference_db)
    noise = dbm_to_watt(noise_power_dbm(params, m))
    w_iab = 1.0 if params.unweighted_interference else pi
    w_mbs = 1.0 if params.unweighted_interference else p0
    idx = np.arange(n)

    i_u0 = np.einsum("lm,alm->am", w_iab * g[1:, 0, :], z_all)
    sinr_u0 = (p0 * g[0, 0, :])[None, :] * x_all[:, 0, :] / (i_u0 + noise)

    g_bb = g[1:, 1 : 1 + n, :]
    co_b = np.einsum("ilm,aim->alm", g_bb, z_all) - g_bb[idx, idx, :][None] * z_all
    den_b = w_iab * co_b + pi * xi * z_all + noise
    sinr_b = (p0 * g[0, 1 : 1 + n, :])[None] * x_all[:, 1:, :] / den_b

    g_bu = g[1:, 1 + n :, :]
    own_u = g_bu[idx, idx, :]
    co_u = np.einsum("ilm,aim->alm", g_bu, z_all) - own_u[None] * z_all
    cross = (w_mbs * g[0, 1 + n :, :])[None] * x_all.sum(axis=1)[:, None, :]
    den_u = w_iab * co_u + cross + noise
    sinr_u = (pi * own_u)[None] * z_all / den_u

    ln2 = math.log(2.0)
    rate_u0 = np.log1p(sinr_u0).sum(axis=1) / ln2
    backhaul = np.log1p(sinr_b).sum(axis=2) / ln2
    access = np.log1p(sinr_u).sum(axis=2) / ln2
    ue = np.minimum(backhaul, access)
    util = np.log(np.maximum(rate_u0, c_floor))
    util += np.log(np.maximum(ue, c_floor)).sum(axis=1)
    return util


def exhaustive_oracle(
    ch: ChannelState,
    params: ChannelParams,
    n_iab: int,
    n_chan: int,
    cap: int = 65_536,
    c_floor: float = DEFAULT_RATE_FLOOR,
) -> OracleResult:
    """Enumerate every feasible allocation on the frozen channel and return
    the utility maximizer (ties break to the lowest action index)."""
    size = action_space_size(n_iab, n_chan)
    if size > cap:
        raise ValueError(f"action space {size} exceeds enumeration cap {cap}")
    x_all, z_all = enumerate_allocations(n_iab, n_chan)
    utilities = evaluate_allocations(x_all, z_all, ch, params, c_floor)
    best = int(np.argmax(utilities))
    return OracleResult(
        best_alloc=encode_action(best, n_iab, n_chan),
        best_utility=float(utilities[best]),
        evaluated_count=size,
        best_index=best,
    )
