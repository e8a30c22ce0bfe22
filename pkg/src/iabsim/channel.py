"""Large-scale pathloss, receiver noise, Rayleigh fading and link gains.

Link gain on subchannel m is the product of a distance-based pathloss factor
and a per-subchannel small-scale fading draw:

    g[i, j, m] = 10^(-PL_db(i, j) / 10) * h[i, j, m],   h ~ Exp(1)

Index conventions used throughout the package:
  transmitters i: 0 = MBS, 1..L = relay nodes
  receivers j:    0 = macro UE group, 1..L = relay nodes (backhaul side),
                  L+1..2L = relay UE groups
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from iabsim.topology import Layout

MBS_TX = "mbs_tx"
IAB_TX = "iab_tx"


@dataclass
class ChannelParams:
    """Radio parameters.

    Pathloss is ``a + b*log10(d)`` dB with d in meters; one coefficient pair
    for macro transmissions, one for relay transmissions. Noise power is
    ``-174 dBm/Hz + 10*log10(W) + NF``; by default W is the full band (set
    ``noise_per_subchannel`` to divide W by the subchannel count instead).
    ``unweighted_interference`` drops the transmit-power weighting on
    interfering gains, for sensitivity studies only.
    """

    mbs_pl_a: float = 34.0
    mbs_pl_b: float = 40.0
    iab_pl_a: float = 37.0
    iab_pl_b: float = 30.0
    bandwidth_hz: float = 2.0e7
    noise_figure_db: float = 10.0
    tx_power_mbs_dbm: float = 43.0
    tx_power_iab_dbm: float = 33.0
    self_interference_db: float = -70.0
    noise_per_subchannel: bool = False
    unweighted_interference: bool = False

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        for name in ("tx_power_mbs_dbm", "tx_power_iab_dbm", "self_interference_db"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass
class ChannelState:
    """Linear power gains for every (transmitter, receiver, subchannel)."""

    gains: np.ndarray  # (1+L, 1+2L, M), strictly positive

    @property
    def n_iab(self) -> int:
        return self.gains.shape[0] - 1

    @property
    def n_chan(self) -> int:
        return self.gains.shape[2]


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def pathloss_db(link_kind: str, distance, params: ChannelParams):
    """Distance-based pathloss in dB for a macro or relay transmitter.

    ``distance`` may be a scalar or an array (meters). Non-positive distances
    are rejected; callers are expected to clamp at ``min_distance`` first.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    if link_kind == MBS_TX:
        a, b = params.mbs_pl_a, params.mbs_pl_b
    elif link_kind == IAB_TX:
        a, b = params.iab_pl_a, params.iab_pl_b
    else:
        raise ValueError(f"unknown link kind {link_kind!r}")
    out = a + b * np.log10(d)
    return float(out) if np.isscalar(distance) else out


def noise_power_dbm(params: ChannelParams, n_chan: int = 1) -> float:
    """Receiver noise power in dBm; the same figure is used at UE groups and
    at relay backhaul receivers."""
    w = params.bandwidth_hz
    if params.noise_per_subchannel:
        w = w / n_chan
    return -174.0 + 10.0 * np.log10(w) + params.noise_figure_db


def draw_small_scale(rng: np.random.Generator, n_iab: int, n_chan: int) -> np.ndarray:
    """I.i.d. unit-mean exponential power fading (Rayleigh envelope) for every
    transmitter/receiver/subchannel triple. Redrawn every coherence step."""
    return rng.exponential(1.0, size=(1 + n_iab, 1 + 2 * n_iab, n_chan))


def link_distances(layout: Layout, min_distance: float = 1.0) -> np.ndarray:
    """(1+L, 1+2L) matrix of transmitter-to-receiver distances, clamped below
    at ``min_distance`` to keep the pathloss finite."""
    tx = np.vstack([layout.mbs_pos[None, :], layout.iab_pos])           # (1+L, 2)
    rx = np.vstack([layout.ue_pos[0][None, :], layout.iab_pos, layout.ue_pos[1:]])  # (1+2L, 2)
    diff = tx[:, None, :] - rx[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    return np.maximum(dist, min_distance)


def gain_tensor(
    layout: Layout,
    params: ChannelParams,
    fading: np.ndarray,
    min_distance: float = 1.0,
) -> ChannelState:
    """Combine pathloss and fading into the per-subchannel gain tensor."""
    n = layout.n_iab
    expected = (1 + n, 1 + 2 * n, fading.shape[2] if fading.ndim == 3 else -1)
    if fading.ndim != 3 or fading.shape[:2] != expected[:2]:
        raise ValueError(
            f"fading shape {fading.shape} inconsistent with layout (want "
            f"(1+{n}, 1+2*{n}, M))"
        )
    dist = link_distances(layout, min_distance)
    pl = np.empty_like(dist)
    pl[0, :] = pathloss_db(MBS_TX, dist[0, :], params)
    pl[1:, :] = pathloss_db(IAB_TX, dist[1:, :], params)
    alpha = 10.0 ** (-pl / 10.0)
    return ChannelState(gains=alpha[:, :, None] * fading)
