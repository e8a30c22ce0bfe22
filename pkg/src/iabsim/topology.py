"""Network geometry: node placement and UE random-walk mobility.

A single macro base station (MBS) sits at the origin. ``n_iab`` relay nodes
are dropped on a circle of radius ``iab_radius`` around it, and every base
station (macro or relay) serves one collocated UE group placed on a circle of
radius ``ue_radius`` around its server. UE groups move; base stations do not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass
class NetworkConfig:
    """Geometry and mobility parameters for one network instance."""

    n_iab: int
    n_chan: int
    iab_radius: float = 250.0
    ue_radius: float = 150.0
    speed_max: float = 2.0
    step_duration: float = 1.0
    min_distance: float = 1.0

    def __post_init__(self):
        if self.n_iab < 1:
            raise ValueError(f"n_iab must be >= 1, got {self.n_iab}")
        if self.n_chan < 1:
            raise ValueError(f"n_chan must be >= 1, got {self.n_chan}")
        for name in ("iab_radius", "ue_radius", "min_distance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.speed_max < 0 or self.step_duration <= 0:
            raise ValueError("speed_max must be >= 0 and step_duration > 0")


@dataclass
class Layout:
    """Positions (meters) of every node.

    ``ue_pos[0]`` is the UE group served by the MBS; ``ue_pos[l]`` (l >= 1) is
    the group served by relay node ``l``.
    """

    mbs_pos: np.ndarray  # (2,)
    iab_pos: np.ndarray  # (n_iab, 2)
    ue_pos: np.ndarray   # (1 + n_iab, 2)

    @property
    def n_iab(self) -> int:
        return self.iab_pos.shape[0]


def deploy(config: NetworkConfig, rng: np.random.Generator) -> Layout:
    """Draw a fresh layout.

    Node counts are fixed by the config; only the angles are random, drawn
    i.i.d. uniform on the two deployment circles.
    """
    n = config.n_iab
    iab_angles = rng.uniform(0.0, TWO_PI, size=n)
    iab_pos = config.iab_radius * np.column_stack([np.cos(iab_angles), np.sin(iab_angles)])
    ue_angles = rng.uniform(0.0, TWO_PI, size=1 + n)
    centers = np.vstack([np.zeros((1, 2)), iab_pos])
    ue_pos = centers + config.ue_radius * np.column_stack([np.cos(ue_angles), np.sin(ue_angles)])
    return Layout(mbs_pos=np.zeros(2), iab_pos=iab_pos, ue_pos=ue_pos)


def step_mobility(layout: Layout, config: NetworkConfig, rng: np.random.Generator) -> Layout:
    """One random-walk step for every UE group.

    Speed ~ U(0, speed_max) m/s and heading ~ U(0, 2*pi), drawn independently
    per group per step. Base stations never move. There is no arena boundary;
    distance clamping happens downstream when gains are computed.
    """
    n_ue = layout.ue_pos.shape[0]
    speed = rng.uniform(0.0, config.speed_max, size=n_ue)
    heading = rng.uniform(0.0, TWO_PI, size=n_ue)
    step = (speed * config.step_duration)[:, None] * np.column_stack(
        [np.cos(heading), np.sin(heading)]
    )
    return Layout(
        mbs_pos=layout.mbs_pos,
        iab_pos=layout.iab_pos,
        ue_pos=layout.ue_pos + step,
    )
