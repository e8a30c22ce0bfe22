"""Two-tier access/backhaul network simulator with learning-based spectrum allocation."""

from iabsim.topology import NetworkConfig, Layout, deploy, step_mobility
from iabsim.channel import ChannelParams, ChannelState
from iabsim.rates import Allocation, RateVector, QosSpec
from iabsim.env import SpectrumEnv, EpisodeConfig, Transition

__version__ = "0.1.0"

__all__ = [
    "NetworkConfig",
    "Layout",
    "deploy",
    "step_mobility",
    "ChannelParams",
    "ChannelState",
    "Allocation",
    "RateVector",
    "QosSpec",
    "SpectrumEnv",
    "EpisodeConfig",
    "Transition",
    "__version__",
]
