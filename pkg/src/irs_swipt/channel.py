"""System configuration, geometry and Rician channel generation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

REF_DISTANCE = 1.0  # meters


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbw(w):
    return 10.0 * np.log10(w)


_PER_USER = ("sinr_target_db", "eh_target_dbm", "antenna_noise_dbm", "id_noise_dbm",
             "eh_efficiency")


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions, QoS targets, noise levels and geometry.

    Per-user quantities accept a scalar (shared by all users) or a sequence of
    length ``num_users``; they are stored as tuples.  Linear-scale copies are
    exposed as arrays (``gamma``, ``eh_target``, ``sigma2``, ``delta2``,
    ``eta``).  Defaults follow the femtocell setup used for the experiments.
    """

    num_bs_antennas: int = 4
    num_irs_elements: int = 50
    num_users: int = 2
    sinr_target_db: float | Sequence[float] = 10.0
    eh_target_dbm: float | Sequence[float] = -10.0
    antenna_noise_dbm: float | Sequence[float] = -70.0
    id_noise_dbm: float | Sequence[float] = -50.0
    eh_efficiency: float | Sequence[float] = 0.5
    bs_position: tuple[float, float] = (0.0, 0.0)
    irs_position: tuple[float, float] = (10.0, 0.0)
    user_area_center: tuple[float, float] = (12.5, 0.0)
    user_area_side: float = 5.0
    pathloss_ref_db: float = -30.0
    pathloss_exponent: float = 2.0
    rician_factor_db: float = 5.0
    spacing_ratio: float = 0.5

    def __post_init__(self):
        if self.num_bs_antennas < 1 or self.num_users < 1 or self.num_irs_elements < 0:
            raise ValueError("need M >= 1, K >= 1 and N >= 0")
        if not self.user_area_side > 0:
            raise ValueError("user area side length must be positive")
        K = self.num_users
        for name in _PER_USER:
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if v.size == 1:
                v = np.repeat(v, K)
            if v.shape != (K,):
                raise ValueError(f"{name} must be a scalar or have one entry per user")
            object.__setattr__(self, name, tuple(float(t) for t in v))
        eta = np.asarray(self.eh_efficiency)
        if np.any(eta <= 0) or np.any(eta > 1):
            raise ValueError("energy conversion efficiency must lie in (0, 1]")
        object.__setattr__(self, "bs_position", tuple(map(float, self.bs_position)))
        object.__setattr__(self, "irs_position", tuple(map(float, self.irs_position)))
        object.__setattr__(self, "user_area_center", tuple(map(float, self.user_area_center)))

    # linear-scale views -------------------------------------------------
    @property
    def gamma(self) -> np.ndarray:
        return db_to_linear(self.sinr_target_db)

    @property
    def eh_target(self) -> np.ndarray:
        return dbm_to_watts(self.eh_target_dbm)

    @property
    def sigma2(self) -> np.ndarray:
        return dbm_to_watts(self.antenna_noise_dbm)

    @property
    def delta2(self) -> np.ndarray:
        return dbm_to_watts(self.id_noise_dbm)

    @property
    def eta(self) -> np.ndarray:
        return np.asarray(self.eh_efficiency, dtype=float)

    @property
    def rician_factor(self) -> float:
        return float(db_to_linear(self.rician_factor_db))

    def with_(self, **changes) -> "SystemConfig":
        """Copy with fields replaced; per-user fields are re-broadcast."""
        if "num_users" in changes:
            for name in _PER_USER:
                if name not in changes and len(set(getattr(self, name))) == 1:
                    changes[name] = getattr(self, name)[0]
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
        return cls(**kw)


@dataclass(frozen=True)
class ChannelRealization:
    """One coherence block.

    ``h_direct[k]`` is the BS-user vector ``h_{b,k}`` (length M),
    ``h_irs_user[k]`` the IRS-user vector ``h_{r,k}`` (length N) and
    ``H_bs_irs`` the ``N x M`` BS-IRS matrix.  Arrays are read-only.
    """

    h_direct: np.ndarray
    h_irs_user: np.ndarray
    H_bs_irs: np.ndarray
    seed: int | None = None
    user_positions: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        hd = np.atleast_2d(np.asarray(self.h_direct, dtype=complex))
        K, M = hd.shape
        hr = np.asarray(self.h_irs_user, dtype=complex).reshape(K, -1)
        N = hr.shape[1]
        G = np.asarray(self.H_bs_irs, dtype=complex).reshape(N, M)
        for name, arr in (("h_direct", hd), ("h_irs_user", hr), ("H_bs_irs", G)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_users(self) -> int:
        return self.h_direct.shape[0]

    @property
    def num_bs_antennas(self) -> int:
        return self.h_direct.shape[1]

    @property
    def num_irs_elements(self) -> int:
        return self.h_irs_user.shape[1]

    def without_irs(self) -> "ChannelRealization":
        K, M = self.h_direct.shape
        return ChannelRealization(self.h_direct, np.zeros((K, 0)), np.zeros((0, M)),
                                  self.seed, self.user_positions)

    def check(self, cfg: SystemConfig) -> None:
        if (self.num_users, self.num_bs_antennas) != (cfg.num_users, cfg.num_bs_antennas):
            raise ValueError("realization dimensions do not match the configuration")


class PhaseShifts:
    """Unit-modulus IRS reflection coefficients ``u_n = exp(j theta_n)``."""

    __slots__ = ("u",)

    def __init__(self, u):
        u = np.asarray(u, dtype=complex).ravel()
        if u.size and np.max(np.abs(np.abs(u) - 1.0)) > 1e-12:
            raise ValueError("phase shifts must have unit modulus")
        u = u.copy()
        u.setflags(write=False)
        self.u = u

    @classmethod
    def from_angles(cls, theta) -> "PhaseShifts":
        return cls(np.exp(1j * np.asarray(theta, dtype=float)))

    @classmethod
    def project(cls, v) -> "PhaseShifts":
        """Nearest unit-modulus vector (entrywise phase)."""
        return cls(np.exp(1j * np.angle(np.asarray(v, dtype=complex))))

    @classmethod
    def ones(cls, n: int) -> "PhaseShifts":
        return cls(np.ones(n, dtype=complex))

    @property
    def angles(self) -> np.ndarray:
        """Phases in (0, 2*pi]."""
        th = np.mod(np.angle(self.u), 2 * np.pi)
        return np.where(th <= 0.0, 2 * np.pi, th)

    def __len__(self):
        return self.u.size

    def __eq__(self, other):
        return isinstance(other, PhaseShifts) and np.array_equal(self.u, other.u)

    def __repr__(self):
        return f"PhaseShifts(N={self.u.size})"


def path_loss_linear(d, cfg: SystemConfig | None = None, ref_db: float = -30.0,
                     exponent: float = 2.0):
    """Large-scale power gain ``C0 * (d / D0) ** -alpha`` with ``D0 = 1 m``."""
    if cfg is not None:
        ref_db, exponent = cfg.pathloss_ref_db, cfg.pathloss_exponent
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    return db_to_linear(ref_db) * (d / REF_DISTANCE) ** (-exponent)


def ula_steering(length: int, aoa: float, spacing_ratio: float = 0.5) -> np.ndarray:
    if length < 1:
        raise ValueError("array length must be at least 1")
    theta = -2.0 * np.pi * spacing_ratio * np.sin(aoa)
    return np.exp(1j * theta * np.arange(length))


def _angle(src, dst) -> float:
    return math.atan2(dst[1] - src[1], dst[0] - src[0])


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    z = rng.standard_normal((*shape, 2))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def rician_weights(cfg: SystemConfig) -> tuple[float, float]:
    kr_db = cfg.rician_factor_db
    if math.isinf(kr_db):
        return (1.0, 0.0) if kr_db > 0 else (0.0, 1.0)
    kr = cfg.rician_factor
    return math.sqrt(kr / (1 + kr)), math.sqrt(1 / (1 + kr))


def draw_user_positions(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    half = cfg.user_area_side / 2
    cx, cy = cfg.user_area_center
    return np.column_stack([rng.uniform(cx - half, cx + half, cfg.num_users),
                            rng.uniform(cy - half, cy + half, cfg.num_users)])


def draw_realization(cfg: SystemConfig, seed: int,
                     user_positions: np.ndarray | None = None) -> ChannelRealization:
    """Draw one Rician realization.

    Independent Philox streams are used for user positions, BS-user,
    IRS-user and BS-IRS scattering.  Draws fill antenna/element-major
    arrays so a larger M (direct links) or N (IRS links) extends the same
    seed's channels instead of reshuffling them.
    """
    M, N, K = cfg.num_bs_antennas, cfg.num_irs_elements, cfg.num_users
    ss = np.random.SeedSequence(seed)
    ss_pos, ss_dir, ss_ru, ss_br = ss.spawn(4)
    s_pos, s_dir, s_ru = (np.random.Generator(np.random.Philox(s)) for s in (ss_pos, ss_dir, ss_ru))
    pos = draw_user_positions(cfg, s_pos)
    if user_positions is not None:
        pos = np.asarray(user_positions, dtype=float).reshape(K, 2)
    w_los, w_nlos = rician_weights(cfg)
    bs, irs = cfg.bs_position, cfg.irs_position
    sr = cfg.spacing_ratio

    nlos_dir = _cn(s_dir, (M, K))
    h_direct = np.empty((K, M), dtype=complex)
    for k in range(K):
        d = math.dist(bs, pos[k])
        los = ula_steering(M, _angle(bs, pos[k]), sr)
        h_direct[k] = math.sqrt(path_loss_linear(d, cfg)) * (w_los * los + w_nlos * nlos_dir[:, k])

    h_ru = np.empty((K, N), dtype=complex)
    if N:
        nlos_ru = _cn(s_ru, (N, K))
        for k in range(K):
            d = math.dist(irs, pos[k])
            los = ula_steering(N, _angle(irs, pos[k]), sr)
            h_ru[k] = math.sqrt(path_loss_linear(d, cfg)) * (w_los * los + w_nlos * nlos_ru[:, k])
        d_br = math.dist(bs, irs)
        los_br = np.outer(ula_steering(N, _angle(irs, bs), sr),
                          ula_steering(M, _angle(bs, irs), sr).conj())
        # one child stream per BS antenna so columns survive changes of M and N
        nlos_br = np.column_stack([_cn(np.random.Generator(np.random.Philox(s)), (N,))
                                   for s in ss_br.spawn(M)])
        H_br = math.sqrt(path_loss_linear(d_br, cfg)) * (w_los * los_br + w_nlos * nlos_br)
    else:
        H_br = np.zeros((0, M), dtype=complex)
    return ChannelRealization(h_direct, h_ru, H_br, seed=seed, user_positions=pos)


def reflected_coefficients(real: ChannelRealization, k: int) -> np.ndarray:
    """``diag(h_{r,k}^H) H_{b,r}``: row n maps BS weights to element n's reflection."""
    return real.h_irs_user[k].conj()[:, None] * real.H_bs_irs


def effective_channel(real: ChannelRealization, u: PhaseShifts | None, k: int) -> np.ndarray:
    """``h_k`` with ``h_k^H = h_{b,k}^H + h_{r,k}^H diag(u) H_{b,r}``."""
    hd = real.h_direct[k]
    if real.num_irs_elements == 0:
        return hd.copy()
    if u is None or len(u) != real.num_irs_elements:
        raise ValueError("phase-shift vector does not match the IRS size")
    row = u.u @ reflected_coefficients(real, k)  # h_k^H - h_{b,k}^H
    return hd + row.conj()


def effective_channels(real: ChannelRealization, u: PhaseShifts | None) -> np.ndarray:
    """All ``h_k`` stacked as rows (``K x M``)."""
    return np.stack([effective_channel(real, u, k) for k in range(real.num_users)])
