"""Phase-shift step: margin maximisation over a lifted unit-modulus vector.

For user ``k`` and beamformer ``w_i`` write the received amplitude as
``h_k^H w_i = a_ki + u_p^H b_ki`` with ``a_ki = h_{b,k}^H w_i``,
``b_ki = diag(h_{r,k}^H) H_{b,r} w_i`` and ``u_p = conj(u)``.  With
``v = [u_p; 1]`` and ``V = v v^H``::

    |h_k^H w_i|^2 = Tr(G_ki V) + |a_ki|^2,
    G_ki = [[b b^H, b conj(a)], [a b^H, 0]].

Dropping ``rank(V) = 1`` leaves an SDP in ``V`` with unit diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import conic
from ..channel import ChannelRealization, PhaseShifts, SystemConfig, reflected_coefficients
from ..conic import Affine, ConicProgram, ProgramBuilder, affine_sum
from .common import rank_ratio


@dataclass(frozen=True)
class PhaseSubproblemData:
    a: np.ndarray  # (K, K): a[k, i] = h_{b,k}^H w_i
    b: np.ndarray  # (K, K, N): b[k, i] = diag(h_{r,k}^H) H_{b,r} w_i

    @property
    def num_elements(self) -> int:
        return self.b.shape[2]

    def G(self, k: int, i: int) -> np.ndarray:
        b, a = self.b[k, i], self.a[k, i]
        N = b.size
        out = np.zeros((N + 1, N + 1), dtype=complex)
        out[:N, :N] = np.outer(b, b.conj())
        out[:N, N] = b * np.conj(a)
        out[N, :N] = a * b.conj()
        return out

    def amplitudes(self, u: PhaseShifts) -> np.ndarray:
        """``h_k^H w_i`` for phase shifts ``u``, shape ``(K, K)``."""
        return self.a + np.einsum("n,kin->ki", u.u, self.b)

    def gains_lifted(self, V: np.ndarray) -> np.ndarray:
        """``Tr(G_ki V) + |a_ki|^2`` for a lifted matrix ``V``."""
        K = self.a.shape[0]
        out = np.empty((K, K))
        for k in range(K):
            for i in range(K):
                out[k, i] = np.vdot(self.G(k, i), V).real + abs(self.a[k, i]) ** 2
        return out


def phase_data(real: ChannelRealization, W: np.ndarray) -> PhaseSubproblemData:
    W = np.atleast_2d(W)
    a = real.h_direct.conj() @ W.T  # a[k, i] = h_{b,k}^H w_i
    b = np.stack([reflected_coefficients(real, k) @ W.T for k in range(real.num_users)])
    return PhaseSubproblemData(a=a, b=np.transpose(b, (0, 2, 1)))


def lift(u: PhaseShifts) -> np.ndarray:
    v = np.append(u.u.conj(), 1.0)
    return np.outer(v, v.conj())


def _margin_rhs(cfg: SystemConfig, rho: np.ndarray):
    sinr_rhs = cfg.sigma2 + cfg.delta2 / rho
    eh_rhs = cfg.eh_target / (cfg.eta * (1.0 - rho))
    return sinr_rhs, eh_rhs


def build_p5(cfg: SystemConfig, data: PhaseSubproblemData, rho: np.ndarray,
             weight: float = 1.0) -> ConicProgram:
    """Maximise ``sum_k (alpha_k + weight * phi_k)`` over unit-diagonal ``V``.

    ``alpha_k`` / ``phi_k`` are the SINR and harvesting margins in watts.
    All rows and margins share one scale ``S`` so the weight keeps its
    meaning.
    """
    K = data.a.shape[0]
    N = data.num_elements
    gam = cfg.gamma
    sinr_rhs, eh_rhs = _margin_rhs(cfg, np.asarray(rho, dtype=float))
    S = float(max(np.max(sinr_rhs), np.max(eh_rhs)))
    a2 = np.abs(data.a) ** 2

    pb = ProgramBuilder()
    V = pb.hermitian("V", N + 1)
    alpha = pb.variable("alpha", K, cone="nonneg")
    phi = pb.variable("phi", K, cone="nonneg")
    for n in range(N + 1):
        pb.equal(V.diag(n), 1.0)
    for k in range(K):
        Gs = [data.G(k, i) for i in range(K)]
        sig = V.trace_with(Gs[k] / gam[k] - sum(Gs[i] for i in range(K) if i != k), 1.0 / S)
        const = (a2[k, k] / gam[k] - sum(a2[k, i] for i in range(K) if i != k)) / S
        pb.geq(sig + const - Affine.var(alpha[k]), sinr_rhs[k] / S)
        eh = V.trace_with(sum(Gs), 1.0 / S)
        pb.geq(eh + a2[k].sum() / S - Affine.var(phi[k]), eh_rhs[k] / S)
    pb.maximize(affine_sum([Affine.var(x) for x in alpha] + [Affine.var(x) * weight for x in phi]))
    prog = pb.build()
    prog.meta.update(margin_scale=S)
    return prog


def p3_margins(cfg: SystemConfig, data: PhaseSubproblemData, rho: np.ndarray,
               u: PhaseShifts):
    """Relative SINR / harvesting margins at fixed beamformers and ratios."""
    G = np.abs(data.amplitudes(u)) ** 2
    sig = np.diag(G)
    interf = G.sum(axis=1) - sig
    sinr = rho * sig / (rho * interf + rho * cfg.sigma2 + cfg.delta2)
    eh = cfg.eta * (1 - rho) * G.sum(axis=1)
    return sinr / cfg.gamma - 1.0, eh / cfg.eh_target - 1.0


def extract_phases(V: np.ndarray, cfg: SystemConfig, data: PhaseSubproblemData,
                   rho: np.ndarray, tol: float = 1e-7) -> PhaseShifts | None:
    """First eigenvector of ``V`` (by decreasing eigenvalue) that passes the QoS check.

    Each eigenvector is scaled so its last entry is 1 and its first ``N``
    entries are projected onto the unit circle.  Returns ``None`` when no
    candidate keeps every user's SINR and harvested power at or above
    target (relative slack ``tol``); the caller then keeps its phases.
    """
    V = 0.5 * (V + V.conj().T)
    lam, vec = np.linalg.eigh(V)
    for j in np.argsort(-lam, kind="stable"):
        v = vec[:, j]
        last = v[-1]
        if abs(last) < 1e-12:
            continue
        v = v / last
        u = PhaseShifts.project(np.conj(v[:-1]))
        sm, em = p3_margins(cfg, data, rho, u)
        if np.all(sm >= -tol) and np.all(em >= -tol):
            return u
    return None


@dataclass
class PhaseStep:
    phases: PhaseShifts | None  # None: keep the previous phases
    margin_objective: float
    rank_ratio: float
    status: str


def phase_step(cfg: SystemConfig, real: ChannelRealization, W: np.ndarray, rho: np.ndarray,
               weight: float = 1.0, tol: float = 1e-7, backend: str = "auto") -> PhaseStep:
    data = phase_data(real, W)
    prog = build_p5(cfg, data, rho, weight)
    sol = conic.solve(prog, backend=backend)
    V = sol["V"]
    # a stalled solve still carries a usable iterate: every candidate is
    # screened against the exact constraints, so only an infeasible or
    # non-finite result is discarded outright
    if sol.status in ("infeasible", "unbounded") or not np.all(np.isfinite(V)):
        return PhaseStep(None, float("nan"), float("nan"), sol.status)
    u = extract_phases(V, cfg, data, rho, tol)
    return PhaseStep(u, -sol.objective * prog.meta["margin_scale"], rank_ratio(V), sol.status)
