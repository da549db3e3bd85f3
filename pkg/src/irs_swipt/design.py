"""Decision variables of the joint design problem."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import PhaseShifts


@dataclass(frozen=True)
class Design:
    """Beamformers (rows of ``W``, shape ``K x M``), IRS phases and PS ratios."""

    beamformers: np.ndarray
    phase_shifts: PhaseShifts
    ps_ratios: np.ndarray

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.beamformers, dtype=complex)).copy()
        rho = np.atleast_1d(np.asarray(self.ps_ratios, dtype=float)).copy()
        if rho.shape != (W.shape[0],):
            raise ValueError("need one power-splitting ratio per beamformer")
        if not np.all(np.isfinite(W)):
            raise ValueError("beamformers must be finite")
        W.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "beamformers", W)
        object.__setattr__(self, "ps_ratios", rho)

    @property
    def num_users(self) -> int:
        return self.beamformers.shape[0]

    @property
    def power(self) -> float:
        """Total transmit power ``sum_k ||w_k||^2`` in watts."""
        return float(np.sum(np.abs(self.beamformers) ** 2))

    @property
    def power_dbw(self) -> float:
        return float(10 * np.log10(self.power))
