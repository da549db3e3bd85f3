"""Beamformer / power-splitting stage for fixed effective channels.

Three variants share the interface ``(cfg, H) -> (W, rho)`` where ``H`` holds
the effective channels ``h_k`` as rows:

* semidefinite relaxation (rank-one extraction from PSD ``W_k``),
* maximum-ratio directions with a second-order cone power allocation,
* zero forcing in closed form.

All programs are scaled so that their data is O(1): beamformer powers are
measured in units of ``P0``, every constraint row is divided by the power
a user needs to receive, and the ratio is split as ``rho = a x`` and
``1 - rho = b y`` with ``a x + b y = 1``.  The scales ``a`` and ``b``
estimate the ratio when it approaches 0 (harvesting dominates) or 1
(harvesting is negligible), so both hyperbolic constraints read
``t x >= 1`` and ``s y >= 1`` with O(1) variables in every regime.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import conic
from ..channel import SystemConfig
from ..conic import Affine, ConicProgram, ProgramBuilder, affine_sum
from .common import (DegenerateChannel, DesignError, InfeasibleInstance, UnsupportedDimensions,
                     extract_rank_one, log)

ONE = Affine(const=1.0)


def _needs(cfg: SystemConfig) -> np.ndarray:
    """Received power each user needs, roughly: the larger of the two targets."""
    return np.maximum(cfg.gamma * (cfg.sigma2 + cfg.delta2), cfg.eh_target / cfg.eta)


def _power_scale(cfg: SystemConfig, gains: np.ndarray) -> float:
    g = float(np.median(gains))
    if not g > 0:
        raise DegenerateChannel("all effective channels vanish")
    return float(np.max(_needs(cfg)) / g)


def _ratio_scales(cfg: SystemConfig):
    """``(a, b)``: estimates of ``rho`` and ``1 - rho`` when small, else 1."""
    need = _needs(cfg)
    a = np.minimum(1.0, cfg.gamma * cfg.delta2 / need)
    b = np.minimum(1.0, cfg.eh_target / (cfg.eta * need))
    return a, b


def _split(pb: ProgramBuilder, K: int, a, b):
    """Scaled ratio variables ``x`` (``rho = a x``) and ``y`` (``1 - rho = b y``)."""
    x = pb.variable("rho_id", K)
    y = pb.variable("rho_eh", K)
    for k in range(K):
        pb.equal(Affine.var(x[k]) * a[k] + Affine.var(y[k]) * b[k], 1.0)
    return x, y


def _solve_rescaled(build, cfg: SystemConfig, backend: str, attempts: int = 3):
    """Solve ``build(scales)``, re-scaling the ratio split from the solution.

    The a-priori scales can be far off (e.g. an interference-limited user
    needs a much larger ratio than its noise levels suggest).  When the
    solve fails or the recovered ratio lies more than a factor 10 from its
    scale, the program is rebuilt with scales taken from that ratio.
    """
    scales = _ratio_scales(cfg)
    for _ in range(attempts):
        prog = build(scales)
        sol = conic.solve(prog, backend=backend)
        if sol.status in ("infeasible", "unbounded") or not np.all(np.isfinite(sol.x)):
            break
        rho = _ratios(sol, prog.meta)
        new = (np.clip(rho, 1e-12, 1.0), np.clip(1.0 - rho, 1e-12, 1.0))
        off = max(float(np.max(np.abs(np.log10(n / o)))) for n, o in zip(new, scales))
        if sol.optimal and off <= 1.0:
            break
        scales = new
    return prog, sol


def _ratios(sol, meta) -> np.ndarray:
    """``rho`` from the scaled split, using whichever side is accurate."""
    a, b = meta["ratio_scales"]
    rho = np.where(b < a, 1.0 - b * sol["rho_eh"], a * sol["rho_id"])
    return np.clip(rho, 1e-15, 1 - 1e-15)


def _status_error(sol, what: str) -> DesignError:
    if sol.status == "infeasible":
        return InfeasibleInstance(f"{what} is infeasible")
    return DesignError(f"{what} failed ({sol.status}, {sol.backend})")


# ---------------------------------------------------------------------------
# semidefinite relaxation


def build_p2(cfg: SystemConfig, H: np.ndarray, include_eh: bool = True,
             ratio_scales=None) -> ConicProgram:
    """Relaxed joint beamforming / power-splitting program for fixed channels.

    Variables: ``W_k`` (Hermitian PSD, in units of ``P0``), the split
    ``rho_k = a_k x_k``, ``1 - rho_k = b_k y_k`` and the bounds
    ``t_k >= a_k / rho_k``, ``s_k >= b_k / (1 - rho_k)`` tied to it through
    rotated cones.  The noise term is ``delta_k^2 t_k / a_k`` and the
    harvesting requirement ``e_k s_k / (eta_k b_k)``.  With
    ``include_eh=False`` the harvesting rows are dropped, leaving the
    classic SINR-constrained power minimisation with ``rho_k <= 1``.
    ``ratio_scales`` overrides the a-priori ``(a, b)``.
    """
    H = np.atleast_2d(H)
    K, M = H.shape
    gam, s2, d2 = cfg.gamma, cfg.sigma2, cfg.delta2
    e_eta = cfg.eh_target / cfg.eta
    need = _needs(cfg)
    a, b = _ratio_scales(cfg) if ratio_scales is None else ratio_scales
    P0 = _power_scale(cfg, np.sum(np.abs(H) ** 2, axis=1))
    Hk = [np.outer(h, h.conj()) for h in H]

    pb = ProgramBuilder()
    Ws = [pb.hermitian(f"W{k}", M) for k in range(K)]
    if include_eh:
        x, y = _split(pb, K, a, b)
    else:
        x = pb.variable("rho_id", K)
    t = pb.variable("t", K)
    s = pb.variable("s", K) if include_eh else None
    for k in range(K):
        nk = need[k] / gam[k]
        row = [Ws[k].trace_with(Hk[k], P0 / (gam[k] * nk))]
        row += [Ws[i].trace_with(Hk[k], -P0 / nk) for i in range(K) if i != k]
        row.append(Affine.var(t[k]) * (-d2[k] / (a[k] * nk)))
        pb.geq(affine_sum(row), s2[k] / nk)
        pb.hyperbolic([ONE], Affine.var(t[k]), Affine.var(x[k]), name=f"id{k}")
        if include_eh:
            row = [Ws[i].trace_with(Hk[k], P0 / need[k]) for i in range(K)]
            row.append(Affine.var(s[k]) * (-e_eta[k] / (b[k] * need[k])))
            pb.geq(affine_sum(row), 0.0)
            pb.hyperbolic([ONE], Affine.var(s[k]), Affine.var(y[k]), name=f"eh{k}")
        else:
            pb.leq(Affine.var(x[k]) * a[k], 1.0)
    pb.minimize(affine_sum(W.trace_with(np.eye(M)) for W in Ws))
    prog = pb.build()
    prog.meta.update(power_scale=P0, num_users=K,
                     ratio_scales=(a, b if include_eh else np.ones(K)))
    return prog


def tight_ratios(cfg: SystemConfig, H: np.ndarray, W: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Best power-splitting ratios for fixed beamformers.

    ``rho_k`` only enters user ``k``'s constraints: the SINR grows with it
    and the harvested power shrinks, so the feasible ratios form an interval
    ``[lo, hi]`` with the SINR tight at ``lo`` and the harvesting tight at
    ``hi``.  Returns ``lo`` (most harvested power) when the interval is
    non-empty; when solver round-off leaves it empty, the ratio that
    equalises the two relative margins.  Users whose SINR target is out of
    reach at any ratio keep ``rho``.
    """
    G = np.abs(np.atleast_2d(H).conj() @ np.atleast_2d(W).T) ** 2
    sig = np.diag(G)
    tot = G.sum(axis=1)
    interf = tot - sig
    gam, s2, d2 = cfg.gamma, cfg.sigma2, cfg.delta2
    excess = sig - gam * (interf + s2)
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = gam * d2 / excess
        hi = 1.0 - cfg.eh_target / (cfg.eta * tot)
    out = np.asarray(rho, dtype=float).copy()
    for k in np.flatnonzero((excess > 0) & (lo > 0) & (lo < 1)):
        if lo[k] <= hi[k]:
            out[k] = lo[k]
            continue

        def gap(r, k=k):  # SINR margin minus harvesting margin, increasing in r
            sm = r * sig[k] / (r * (interf[k] + s2[k]) + d2[k]) / gam[k]
            em = cfg.eta[k] * (1 - r) * tot[k] / cfg.eh_target[k]
            return sm - em

        a, b = max(hi[k], 0.0), lo[k]
        for _ in range(200):
            m = 0.5 * (a + b)
            if m in (a, b):
                break
            a, b = (m, b) if gap(m) < 0 else (a, m)
        out[k] = b
    return out


@dataclass
class BeamStage:
    W: np.ndarray  # K x M beamformers
    rho: np.ndarray
    rank_ratios: np.ndarray  # lambda_2 / lambda_1 per W_k (zeros when not applicable)
    notes: tuple[str, ...] = ()


def solve_p2(cfg: SystemConfig, H: np.ndarray, backend: str = "auto",
             repair: bool = True) -> BeamStage:
    prog, sol = _solve_rescaled(lambda sc: build_p2(cfg, H, ratio_scales=sc), cfg, backend)
    if not sol.optimal:
        raise _status_error(sol, "beamforming relaxation")
    K = prog.meta["num_users"]
    P0 = prog.meta["power_scale"]
    W = np.empty((K, H.shape[1]), dtype=complex)
    ratios = np.empty(K)
    tight = True
    for k in range(K):
        w, ratios[k], ok = extract_rank_one(P0 * sol[f"W{k}"])
        W[k] = w
        tight &= ok
    rho = _ratios(sol, prog.meta)
    notes = ()
    if not tight:
        log.info("relaxation not rank one (max ratio %.2e)", ratios.max())
        notes = (f"rank-one ratio {ratios.max():.3e}",)
        if repair:
            # keep the principal directions, re-optimise powers and ratios
            dirs = W / np.maximum(np.linalg.norm(W, axis=1, keepdims=True), 1e-300)
            st = solve_p8(cfg, H, dirs, backend=backend)
            return BeamStage(st.W, st.rho, ratios, notes + ("powers re-solved",))
    return BeamStage(W, tight_ratios(cfg, H, W, rho), ratios, notes)


# ---------------------------------------------------------------------------
# maximum ratio transmission


def mrt_directions(H: np.ndarray) -> np.ndarray:
    """Unit-norm ``h_k / ||h_k||`` as rows."""
    H = np.atleast_2d(H)
    n = np.linalg.norm(H, axis=1, keepdims=True)
    if np.any(n == 0):
        raise DegenerateChannel("a user has an all-zero effective channel")
    return H / n


def build_p8(cfg: SystemConfig, H: np.ndarray, directions: np.ndarray,
             ratio_scales=None) -> ConicProgram:
    """Power and power-splitting allocation for fixed unit-norm directions.

    ``g[k, i] = |h_k^H wbar_i|^2``.  Variables ``P_k >= 0`` (units of
    ``P0``), the split ``rho_k = a_k x_k``, ``1 - rho_k = b_k y_k``, the
    received power ``Pbar_k = sum_i P_i g[k, i]`` (units of
    ``e_k / (eta_k b_k)``) and the SINR slack ``z_k`` (units of
    ``gamma_k delta_k^2 / a_k``); both hyperbolic constraints become cones.
    """
    H = np.atleast_2d(H)
    K = H.shape[0]
    g = np.abs(H.conj() @ np.atleast_2d(directions).T) ** 2
    gam, s2, d2 = cfg.gamma, cfg.sigma2, cfg.delta2
    e_eta = cfg.eh_target / cfg.eta
    need = _needs(cfg)
    a, b = _ratio_scales(cfg) if ratio_scales is None else ratio_scales
    P0 = _power_scale(cfg, np.diag(g))

    pb = ProgramBuilder()
    P = pb.variable("P", K, cone="nonneg")
    x, y = _split(pb, K, a, b)
    Pbar = pb.variable("Pbar", K)
    z = pb.variable("z", K)
    for k in range(K):
        # (1 + gamma) P_k g_kk = z_k + gamma (Pbar_k + sigma^2)
        row = [Affine.var(P[i]) * (P0 * ((1 + gam[k]) * g[k, k] * (i == k) - gam[k] * g[k, i])
                                   / need[k]) for i in range(K)]
        row.append(Affine.var(z[k]) * (-gam[k] * d2[k] / (a[k] * need[k])))
        pb.equal(affine_sum(row), gam[k] * s2[k] / need[k])
        # Pbar_k = sum_i P_i g_ki
        row = [Affine.var(P[i]) * (P0 * g[k, i] / need[k]) for i in range(K)]
        pb.equal(affine_sum(row) - Affine.var(Pbar[k]) * (e_eta[k] / (b[k] * need[k])), 0.0)
        pb.hyperbolic([ONE], Affine.var(z[k]), Affine.var(x[k]), name=f"id{k}")
        pb.hyperbolic([ONE], Affine.var(Pbar[k]), Affine.var(y[k]), name=f"eh{k}")
    pb.minimize(affine_sum(Affine.var(p) for p in P))
    prog = pb.build()
    prog.meta.update(power_scale=P0, gains=g, ratio_scales=(a, b))
    return prog


def solve_p8(cfg: SystemConfig, H: np.ndarray, directions: np.ndarray | None = None,
             backend: str = "auto") -> BeamStage:
    dirs = mrt_directions(H) if directions is None else np.atleast_2d(directions)
    prog, sol = _solve_rescaled(lambda sc: build_p8(cfg, H, dirs, ratio_scales=sc), cfg,
                                backend)
    if not sol.optimal:
        raise _status_error(sol, "power allocation")
    p = np.maximum(sol["P"], 0.0) * prog.meta["power_scale"]
    W = np.sqrt(p)[:, None] * dirs
    rho = tight_ratios(cfg, H, W, _ratios(sol, prog.meta))
    return BeamStage(W, rho, np.zeros(len(p)))


# ---------------------------------------------------------------------------
# zero forcing


def zf_constants(cfg: SystemConfig, variant: str = "derived"):
    """Coefficients ``(kappa, vartheta)`` of ``rho^2 + (kappa + vartheta - 1) rho - vartheta = 0``.

    ``"derived"``: substituting the SINR equality into the harvesting
    equality gives ``kappa = e / (eta gamma sigma^2)``,
    ``vartheta = delta^2 / sigma^2``.  ``"scaled"``: the variant with a
    ``(gamma + 1)`` denominator, ``kappa = e / (eta (gamma + 1) sigma^2)``,
    ``vartheta = gamma delta^2 / ((gamma + 1) sigma^2)``.
    """
    gam, s2, d2, e, eta = cfg.gamma, cfg.sigma2, cfg.delta2, cfg.eh_target, cfg.eta
    if variant == "derived":
        return e / (eta * gam * s2), d2 / s2
    if variant == "scaled":
        return e / (eta * (gam + 1) * s2), gam * d2 / ((gam + 1) * s2)
    raise ValueError(f"unknown constant set {variant!r}")


def zf_rho(kappa, vartheta):
    """Positive root of ``rho^2 + (kappa + vartheta - 1) rho - vartheta = 0``."""
    b = np.asarray(kappa) + np.asarray(vartheta) - 1.0
    disc = np.sqrt(b * b + 4.0 * np.asarray(vartheta))
    # cancellation-free form of (-b + disc) / 2
    return np.where(b > 0, 2.0 * np.asarray(vartheta) / (b + disc + (b + disc == 0)), (disc - b) / 2.0)


def null_space_projectors(H: np.ndarray, rtol: float = 1e-10) -> list[np.ndarray]:
    """Orthonormal bases ``U_k`` of ``{w : h_i^H w = 0 for all i != k}``."""
    H = np.atleast_2d(H)
    K, M = H.shape
    if M < K:
        raise UnsupportedDimensions(f"zero forcing needs M >= K (M={M}, K={K})")
    out = []
    for k in range(K):
        others = np.delete(H, k, axis=0).conj()  # rows h_i^H
        if others.shape[0] == 0:
            out.append(np.eye(M, dtype=complex))
            continue
        _, sv, Vh = np.linalg.svd(others)
        rank = int(np.sum(sv > rtol * sv[0])) if sv.size and sv[0] > 0 else 0
        out.append(Vh[rank:].conj().T)
    return out


@dataclass
class ZfStage(BeamStage):
    constants: str = "derived"
    eh_residual: float = 0.0  # max relative residual of the harvesting equality


def zf_residuals(cfg: SystemConfig, rho: np.ndarray) -> np.ndarray:
    """Relative residual of the harvesting equality at the SINR-tight point."""
    sig2 = cfg.gamma * (cfg.sigma2 + cfg.delta2 / rho)  # |h^H w|^2 at SINR equality
    return cfg.eta * (1 - rho) * sig2 / cfg.eh_target - 1.0


def zf_closed_form(cfg: SystemConfig, H: np.ndarray, constants: str = "auto") -> ZfStage:
    """Per-user zero-forcing beamformers and power-splitting ratios.

    ``constants="auto"`` evaluates both coefficient sets of
    :func:`zf_constants` and keeps the one whose root makes the SINR and
    harvesting constraints hold with equality.
    """
    H = np.atleast_2d(H)
    if constants == "auto":
        cands = {v: zf_rho(*zf_constants(cfg, v)) for v in ("derived", "scaled")}
        res = {v: float(np.max(np.abs(zf_residuals(cfg, r)))) for v, r in cands.items()}
        constants = min(res, key=res.get)
    rho = zf_rho(*zf_constants(cfg, constants))
    amp2 = cfg.gamma * (cfg.sigma2 + cfg.delta2 / rho)
    W = np.empty_like(H, dtype=complex)
    for k, U in enumerate(null_space_projectors(H)):
        proj = U @ (U.conj().T @ H[k])
        gain = float(np.vdot(H[k], proj).real)  # h^H U U^H h = ||U^H h||^2
        if U.shape[1] == 0 or gain <= 1e-14 * max(np.vdot(H[k], H[k]).real, 1e-300):
            raise DegenerateChannel(f"user {k} lies in the span of the other users")
        W[k] = np.sqrt(amp2[k]) * proj / gain
    return ZfStage(W, np.asarray(rho, dtype=float), np.zeros(H.shape[0]), (), constants,
                   float(np.max(np.abs(zf_residuals(cfg, rho)))))
