"""Joint transmit beamforming, IRS phase-shift and power-splitting design for SWIPT."""

from .channel import (ChannelRealization, PhaseShifts, SystemConfig, draw_realization,
                      effective_channel, effective_channels, path_loss_linear, ula_steering)
from .design import Design
from .metrics import QosReport, harvested_power, qos_check, sinr

__version__ = "0.1.0"

__all__ = [
    "ChannelRealization", "Design", "PhaseShifts", "QosReport", "SystemConfig",
    "draw_realization", "effective_channel", "effective_channels", "harvested_power",
    "path_loss_linear", "qos_check", "sinr", "ula_steering",
]
