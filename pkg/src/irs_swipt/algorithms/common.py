"""Shared types for the alternating (beamforming / phase) designs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger("irs_swipt.algorithms")

RANK_ONE_TOL = 1e-4


class DesignError(RuntimeError):
    """Base class for per-realization failures that the harness records."""

    status = "numerical-failure"


class InfeasibleInstance(DesignError):
    status = "infeasible"


class DegenerateChannel(DesignError):
    status = "degenerate"


class UnsupportedDimensions(ValueError):
    """Structural mismatch (e.g. zero-forcing with fewer antennas than users)."""


@dataclass(frozen=True)
class BcdOptions:
    max_iter: int = 30
    rel_tol: float = 1e-4
    margin_weight: float = 1.0  # weight of the harvesting margins in the phase step
    init: str = "ones"  # "ones" or "random"
    init_seed: int = 0
    accept_tol: float = 1e-7  # relative QoS slack when screening phase candidates
    backend: str = "auto"
    monotone_guard: bool | None = None  # None: on for MRT/ZF, off for SDR

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.init not in ("ones", "random"):
            raise ValueError("init must be 'ones' or 'random'")


@dataclass
class BcdTrace:
    objectives: list[float] = field(default_factory=list)  # watts, one per beam stage
    margin_objectives: list[float] = field(default_factory=list)
    rank_ratios_w: list[np.ndarray] = field(default_factory=list)
    rank_ratios_v: list[float] = field(default_factory=list)
    accepted: list[bool] = field(default_factory=list)
    termination: str = ""
    status: str = "ok"
    notes: list[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.objectives)

    def is_monotone(self, rel: float = 1e-6) -> bool:
        f = np.asarray(self.objectives)
        return bool(np.all(f[1:] <= f[:-1] * (1 + rel)))


def extract_rank_one(W: np.ndarray, tol: float = RANK_ONE_TOL):
    """Principal component of a PSD matrix.

    Returns ``(w, ratio, tight)``: ``w = sqrt(lambda_1) * v_1``, the
    eigenvalue ratio ``lambda_2 / lambda_1`` and whether it is within ``tol``.
    A zero matrix yields a zero vector with ratio 0.
    """
    W = 0.5 * (np.asarray(W) + np.asarray(W).conj().T)
    lam, vec = np.linalg.eigh(W)
    l1 = lam[-1]
    if l1 <= 0:
        return np.zeros(W.shape[0], dtype=complex), 0.0, True
    l2 = max(lam[-2], 0.0) if lam.size > 1 else 0.0
    ratio = float(l2 / l1)
    v = vec[:, -1]
    # fix the global phase so the largest-magnitude entry is real positive
    j = int(np.argmax(np.abs(v)))
    v = v * np.exp(-1j * np.angle(v[j]))
    return np.sqrt(l1) * v, ratio, ratio <= tol


def rank_ratio(X: np.ndarray) -> float:
    lam = np.linalg.eigvalsh(0.5 * (X + X.conj().T))
    if lam[-1] <= 0:
        return 0.0
    return float(max(lam[-2], 0.0) / lam[-1]) if lam.size > 1 else 0.0
