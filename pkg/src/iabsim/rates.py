"""Allocation constraints, SINR, per-UE rates and the fairness objective.

The macro station schedules each subchannel to exactly one first-tier
receiver (its own UE group, row 0 of X, or the backhaul of relay l, row l).
Each relay independently toggles subchannels for its access link (Z). Relays
are full duplex: transmitting on the subchannel they receive backhaul on
leaks residual self-interference into their own receiver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from iabsim.channel import (
    ChannelParams,
    ChannelState,
    dbm_to_watt,
    db_to_linear,
    noise_power_dbm,
)

DEFAULT_RATE_FLOOR = 1e-3  # rates are clamped here before the log utility


class InvalidAllocation(ValueError):
    """Raised when an allocation violates the scheduling constraints."""


@dataclass
class Allocation:
    """Binary allocation matrices.

    x: (1+L, M) macro-station schedule, one-hot per column.
    z: (L, M) access toggles, one row per relay node.
    """

    x: np.ndarray
    z: np.ndarray


@dataclass
class RateVector:
    """Spectral efficiencies (bit/s/Hz summed over subchannels).

    ``rates[0]`` is the macro UE group; ``rates[l]`` for l >= 1 is the relay
    UE group, which is the min of its backhaul and access link rates.
    """

    rates: np.ndarray          # (1+L,)
    backhaul_rates: np.ndarray  # (L,)
    access_rates: np.ndarray    # (L,)


@dataclass
class QosSpec:
    """Per-UE-group required rates."""

    omega: np.ndarray  # (1+L,)

    @classmethod
    def uniform(cls, n_iab: int, omega: float = 5.0) -> "QosSpec":
        return cls(omega=np.full(1 + n_iab, float(omega)))


def validate_allocation(alloc: Allocation, n_iab: int, n_chan: int) -> str | None:
    """Return None if ``alloc`` is feasible, else a message naming the first
    violated constraint. Shape mismatches raise ValueError instead."""
    x, z = np.asarray(alloc.x), np.asarray(alloc.z)
    if x.shape != (1 + n_iab, n_chan):
        raise ValueError(f"x shape {x.shape} != {(1 + n_iab, n_chan)}")
    if z.shape != (n_iab, n_chan):
        raise ValueError(f"z shape {z.shape} != {(n_iab, n_chan)}")
    if not np.isin(x, (0, 1)).all():
        return "x entries must be binary"
    if not np.isin(z, (0, 1)).all():
        return "z entries must be binary"
    col = x.sum(axis=0)
    bad = np.nonzero(col != 1)[0]
    if bad.size:
        m = int(bad[0])
        return f"x column {m} sums to {int(col[m])}, each subchannel needs exactly one receiver"
    # z row sums are bounded by n_chan by construction; nothing left to check
    return None


def require_valid(alloc: Allocation, n_iab: int, n_chan: int) -> None:
    msg = validate_allocation(alloc, n_iab, n_chan)
    if msg is not None:
        raise InvalidAllocation(msg)


def compute_sinr(alloc: Allocation, ch: ChannelState, params: ChannelParams) -> np.ndarray:
    """Per-receiver, per-subchannel SINR in linear units; rows ordered as the
    receiver index (macro UE group, relay backhaul sides, relay UE groups).

    Interference gains are weighted by their transmitter's power unless
    ``params.unweighted_interference`` is set. The macro station transmits on
    every subchannel, so each relay UE group always sees one cross-tier term.
    """
    n, m = ch.n_iab, ch.n_chan
    require_valid(alloc, n, m)
    g = ch.gains
    x = alloc.x.astype(float)
    z = alloc.z.astype(float)

    p0 = dbm_to_watt(params.tx_power_mbs_dbm)
    pi = dbm_to_watt(params.tx_power_iab_dbm)
    xi = db_to_linear(params.self_interference_db)
    noise = dbm_to_watt(noise_power_dbm(params, m))
    w_iab = 1.0 if params.unweighted_interference else pi
    w_mbs = 1.0 if params.unweighted_interference else p0

    # macro UE group: co-tier interference from every active relay
    i_u0 = (w_iab * g[1:, 0, :] * z).sum(axis=0)
    sinr_u0 = p0 * g[0, 0, :] * x[0] / (i_u0 + noise)

    idx = np.arange(n)

    # backhaul receivers: co-tier from the other relays plus residual
    # self-interference when the relay transmits on its own backhaul channel
    g_bb = g[1:, 1 : 1 + n, :]                         # (tx relay, rx relay, m)
    co_b = np.einsum("ilm,im->lm", g_bb, z) - g_bb[idx, idx, :] * z
    den_b = w_iab * co_b + pi * xi * z + noise
    sinr_b = p0 * g[0, 1 : 1 + n, :] * x[1:] / den_b

    # relay UE groups: co-tier from the other relays plus the macro station's
    # cross-tier transmission (present on every subchannel)
    g_bu = g[1:, 1 + n :, :]
    co_u = np.einsum("ilm,im->lm", g_bu, z) - g_bu[idx, idx, :] * z
    cross = w_mbs * g[0, 1 + n :, :] * x.sum(axis=0)[None, :]
    den_u = w_iab * co_u + cross + noise
    sinr_u = pi * g_bu[idx, idx, :] * z / den_u

    return np.vstack([sinr_u0[None, :], sinr_b, sinr_u])


def compute_rates(
    alloc: Allocation,
    ch: ChannelState,
    params: ChannelParams,
    log_base: float = 2.0,
) -> RateVector:
    """Shannon rates summed over subchannels; a relay UE group's rate is the
    min of its backhaul and access rates."""
    sinr = compute_sinr(alloc, ch, params)
    n = ch.n_iab
    per_chan = np.log1p(sinr) / math.log(log_base)
    totals = per_chan.sum(axis=1)
    backhaul = totals[1 : 1 + n]
    access = totals[1 + n :]
    rates = np.concatenate([totals[:1], np.minimum(backhaul, access)])
    return RateVector(rates=rates, backhaul_rates=backhaul, access_rates=access)


def utility(
    rates: RateVector,
    c_floor: float = DEFAULT_RATE_FLOOR,
    log_base: float = math.e,
) -> float:
    """Proportional-fairness objective: sum of log rates over all UE groups.

    Rates are clamped at ``c_floor`` so a starved group contributes a large
    but finite penalty instead of -inf.
    """
    clamped = np.maximum(rates.rates, c_floor)
    return float(np.log(clamped).sum() / math.log(log_base))


def qos_bits(rates: RateVector, qos: QosSpec) -> np.ndarray:
    """1.0 where a UE group meets its required rate (boundary counts as
    satisfied), else 0.0."""
    return (rates.rates >= qos.omega).astype(float)
