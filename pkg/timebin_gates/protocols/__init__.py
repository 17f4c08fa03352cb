"""Application harnesses: qutrit QKD with four mutually unbiased bases and the CHSH detection-efficiency analysis."""

from .chsh import ChshConfig, chsh_threshold, chsh_value
from .mub import MubSet, mub_qutrit
from .qkd import ChannelModel, QkdSession, qkd_run

__all__ = [
    "ChannelModel",
    "ChshConfig",
    "MubSet",
    "QkdSession",
    "chsh_threshold",
    "chsh_value",
    "mub_qutrit",
    "qkd_run",
]
