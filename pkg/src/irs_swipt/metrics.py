"""SINR / harvested-power evaluators and the QoS feasibility check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, SystemConfig, effective_channels
from .design import Design

QOS_TOL = 1e-6


def gains(design: Design, real: ChannelRealization) -> np.ndarray:
    """``G[k, i] = |h_k^H w_i|^2`` for the design's phase shifts."""
    H = effective_channels(real, design.phase_shifts)
    return np.abs(H.conj() @ design.beamformers.T) ** 2


def _sinr_from_gains(G, rho, sigma2, delta2):
    sig = np.diag(G)
    interf = G.sum(axis=1) - sig
    return rho * sig / (rho * interf + rho * sigma2 + delta2)


def _eh_from_gains(G, rho, eta):
    return eta * (1.0 - rho) * G.sum(axis=1)


def sinr(design: Design, real: ChannelRealization, cfg: SystemConfig, k: int | None = None):
    """Received SINR (linear); all users when ``k`` is None."""
    G = gains(design, real)
    out = _sinr_from_gains(G, design.ps_ratios, cfg.sigma2, cfg.delta2)
    return out if k is None else float(out[k])


def harvested_power(design: Design, real: ChannelRealization, cfg: SystemConfig,
                    k: int | None = None):
    """Harvested power in watts (receiver noise is not harvested)."""
    G = gains(design, real)
    out = _eh_from_gains(G, design.ps_ratios, cfg.eta)
    return out if k is None else float(out[k])


def leakage(design: Design, real: ChannelRealization) -> float:
    """``max_{i != k} |h_i^H w_k|^2 / ||w_k||^2`` (0 for a single user)."""
    G = gains(design, real)
    K = G.shape[0]
    if K == 1:
        return 0.0
    norms = np.sum(np.abs(design.beamformers) ** 2, axis=1)
    ratios = [np.max(np.delete(G[:, k], k)) / norms[k] if norms[k] > 0 else 0.0
              for k in range(K)]
    return float(max(ratios))


@dataclass(frozen=True)
class QosReport:
    sinr: np.ndarray
    harvested: np.ndarray
    sinr_margin: np.ndarray  # SINR_k / gamma_k - 1
    eh_margin: np.ndarray  # P_k / e_k - 1
    power: float
    feasible: bool
    worst_violation: float
    structural: tuple[str, ...] = ()

    @property
    def sinr_db(self) -> np.ndarray:
        return 10 * np.log10(self.sinr)

    @property
    def rate(self) -> np.ndarray:
        """Achievable rate ``log2(1 + SINR)`` in bit/s/Hz (informational only)."""
        return np.log2(1.0 + self.sinr)

    @property
    def min_sinr_margin(self) -> float:
        return float(np.min(self.sinr_margin))

    @property
    def min_eh_margin(self) -> float:
        return float(np.min(self.eh_margin))


def qos_check(design: Design, real: ChannelRealization, cfg: SystemConfig,
              tol: float = QOS_TOL) -> QosReport:
    K = cfg.num_users
    if design.beamformers.shape != (K, cfg.num_bs_antennas):
        raise ValueError("beamformer dimensions do not match the configuration")
    if real.h_direct.shape != (K, cfg.num_bs_antennas):
        raise ValueError("realization dimensions do not match the configuration")
    if real.num_irs_elements and len(design.phase_shifts) != real.num_irs_elements:
        raise ValueError("phase-shift vector does not match the IRS size")

    structural = []
    rho = design.ps_ratios
    if np.any(rho <= 0) or np.any(rho >= 1):
        structural.append("power-splitting ratio outside (0, 1)")
    u = design.phase_shifts.u
    if u.size and np.max(np.abs(np.abs(u) - 1)) > 1e-12:
        structural.append("phase shift off the unit circle")

    G = gains(design, real)
    s = _sinr_from_gains(G, rho, cfg.sigma2, cfg.delta2)
    eh = _eh_from_gains(G, rho, cfg.eta)
    sm = s / cfg.gamma - 1.0
    em = eh / cfg.eh_target - 1.0
    worst = float(max(0.0, -np.min(sm), -np.min(em)))
    feasible = not structural and bool(np.all(sm >= -tol) and np.all(em >= -tol))
    return QosReport(sinr=s, harvested=eh, sinr_margin=sm, eh_margin=em,
                     power=design.power, feasible=feasible, worst_violation=worst,
                     structural=tuple(structural))
