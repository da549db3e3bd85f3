"""Primal-dual interior-point method for complex Hermitian SDPs.

Handles programs whose blocks are all ``psd`` or ``nonneg``:

    (P)  min  <C, X>   s.t.  A(X) = b,  X >= 0
    (D)  max  b^T y    s.t.  A^T(y) + Z = C,  Z >= 0

Infeasible-start path following with the HKM search direction and a
Mehrotra predictor-corrector.  The Schur complement is ``m x m`` (``m`` =
number of equality rows), and rows that touch a single diagonal entry of a
matrix block are handled without forming dense products, which makes
unit-diagonal programs of order 50-100 cheap.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .program import (ConicProgram, ConicSolution, coef_to_hermitian, hermitian_to_coef,
                      hermitian_to_params, max_violation, params_to_hermitian, unpack)


class UnsupportedProgram(ValueError):
    pass


class _PsdBlock:
    def __init__(self, blk, A: sp.csr_matrix):
        self.blk = blk
        self.d = d = blk.dim
        sub = A[:, blk.slice].tocsr()
        nnz = np.diff(sub.indptr)
        diag_rows, diag_pos, diag_val, dense_rows, dense_mats = [], [], [], [], []
        for r in np.flatnonzero(nnz):
            cols = sub.indices[sub.indptr[r]:sub.indptr[r + 1]]
            vals = sub.data[sub.indptr[r]:sub.indptr[r + 1]]
            if cols.size == 1 and cols[0] < d:
                diag_rows.append(r)
                diag_pos.append(cols[0])
                diag_val.append(vals[0])
            else:
                dense_rows.append(r)
                dense_mats.append(coef_to_hermitian(sub[r].toarray().ravel(), d))
        self.diag_rows = np.asarray(diag_rows, dtype=int)
        self.diag_pos = np.asarray(diag_pos, dtype=int)
        self.diag_val = np.asarray(diag_val, dtype=float)
        self.dense_rows = np.asarray(dense_rows, dtype=int)
        self.F = (np.asarray(dense_mats) if dense_mats
                  else np.zeros((0, d, d), dtype=complex))

    def schur(self, M: np.ndarray, X: np.ndarray, Zi: np.ndarray) -> None:
        """Accumulate ``Re Tr(A_i X A_j Z^-1)`` into ``M``."""
        dr, dp, dv = self.diag_rows, self.diag_pos, self.diag_val
        er = self.dense_rows
        if dr.size:
            blk = (X[np.ix_(dp, dp)] * Zi[np.ix_(dp, dp)].T).real
            M[np.ix_(dr, dr)] += dv[:, None] * dv[None, :] * blk
        if er.size:
            P = X @ self.F @ Zi
            M[np.ix_(er, er)] += np.einsum("iab,jba->ij", self.F, P).real
            if dr.size:
                cross = P[:, dp, dp].real * dv[None, :]  # (dense, diag)
                M[np.ix_(er, dr)] += cross
                M[np.ix_(dr, er)] += cross.T


def _max_step_psd(X: np.ndarray, dX: np.ndarray) -> float:
    L = np.linalg.cholesky(X)
    Linv_dX = sla.solve_triangular(L, dX, lower=True)
    W = sla.solve_triangular(L, Linv_dX.conj().T, lower=True)
    lam = np.linalg.eigvalsh(0.5 * (W + W.conj().T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_lp(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def _schur_solver(M: np.ndarray):
    """Cholesky solve with one step of iterative refinement.

    The Schur matrix is diagonally scaled first; a tiny shift is added only
    when the plain factorization fails.
    """
    if not np.all(np.isfinite(M)):
        raise np.linalg.LinAlgError("non-finite Schur complement")
    dm = np.diag(M)
    d = np.sqrt(np.where(dm > 0, dm, 1.0))
    Ms = M / d[:, None] / d[None, :]
    fac = None
    for shift in (0.0, 1e-14, 1e-12, 1e-10):
        try:
            fac = sla.cho_factor(Ms + shift * np.eye(M.shape[0]) if shift else Ms)
            break
        except np.linalg.LinAlgError:
            continue
    if fac is None:
        Mp = np.linalg.pinv(M)
        return lambda r: Mp @ r

    def solve(r):
        x = sla.cho_solve(fac, r / d) / d
        x += sla.cho_solve(fac, (r - M @ x) / d) / d
        return x

    return solve


def solve_ipm(prog: ConicProgram, feas_tol: float = 1e-7, gap_tol: float = 1e-8,
              max_iter: int = 200, verbose: bool = False) -> ConicSolution:
    for blk in prog.blocks:
        if blk.kind not in ("psd", "nonneg"):
            raise UnsupportedProgram(f"block {blk.name!r} of kind {blk.kind!r}")

    m, n = prog.A.shape
    # row equilibration
    rn = np.sqrt(np.asarray(prog.A.multiply(prog.A).sum(axis=1)).ravel())
    rs = 1.0 / np.where(rn > 0, rn, 1.0)
    A = sp.diags(rs) @ prog.A
    A = A.tocsr()
    AT = A.T.tocsr()
    b = prog.b * rs
    c = prog.c

    psd = [_PsdBlock(blk, A) for blk in prog.blocks if blk.kind == "psd"]
    lp_idx = np.concatenate([np.arange(blk.start, blk.start + blk.size)
                             for blk in prog.blocks if blk.kind == "nonneg"] or [np.zeros(0, int)])
    A_lp = A[:, lp_idx].tocsc() if lp_idx.size else None
    nu = sum(p.d for p in psd) + lp_idx.size

    def to_vec(Xs, xl):
        v = np.zeros(n)
        for p, Xb in zip(psd, Xs):
            v[p.blk.slice] = hermitian_to_params(Xb)
        v[lp_idx] = xl
        return v

    def to_coef(Zs, zl):
        v = np.zeros(n)
        for p, Zb in zip(psd, Zs):
            v[p.blk.slice] = hermitian_to_coef(Zb)
        v[lp_idx] = zl
        return v

    def split_coef(g):
        return [coef_to_hermitian(g[p.blk.slice], p.d) for p in psd], g[lp_idx]

    # starting point
    norm_b = np.linalg.norm(b)
    norm_c = np.linalg.norm(c)
    Xs, Zs = [], []
    for p in psd:
        Ab = A[:, p.blk.slice]
        an = np.sqrt(np.asarray(Ab.multiply(Ab).sum(axis=1)).ravel())
        Cb = coef_to_hermitian(c[p.blk.slice], p.d)
        xi = max(10.0, np.sqrt(p.d), p.d * np.max((1 + np.abs(b)) / (1 + an), initial=0.0))
        zeta = max(10.0, np.sqrt(p.d), np.max(an, initial=0.0), np.linalg.norm(Cb))
        Xs.append(xi * np.eye(p.d, dtype=complex))
        Zs.append(zeta * np.eye(p.d, dtype=complex))
    if lp_idx.size:
        xl = np.full(lp_idx.size, max(10.0, np.max(1 + np.abs(b), initial=1.0)))
        zl = np.full(lp_idx.size, max(10.0, 1 + np.max(np.abs(c[lp_idx]), initial=0.0)))
    else:
        xl = zl = np.zeros(0)
    y = np.zeros(m)

    status = "numerical-failure"
    it = 0
    pobj = dobj = np.nan
    for it in range(1, max_iter + 1):
        xvec = to_vec(Xs, xl)
        zcoef = to_coef(Zs, zl)
        Rp = b - A @ xvec
        Rd = c - AT @ y - zcoef
        gap = sum(float(np.vdot(Zb, Xb).real) for Xb, Zb in zip(Xs, Zs)) + float(xl @ zl)
        mu = gap / nu
        pobj = float(c @ xvec)
        dobj = float(b @ y)
        pinf = np.linalg.norm(Rp) / (1 + norm_b)
        dinf = np.linalg.norm(Rd) / (1 + norm_c)
        relgap = max(abs(pobj - dobj), gap) / (1 + abs(pobj) + abs(dobj))
        if verbose:
            print(f"{it:3d} pobj={pobj:+.9e} dobj={dobj:+.9e} pinf={pinf:.1e} "
                  f"dinf={dinf:.1e} gap={relgap:.1e} mu={mu:.1e}")
        if pinf < 0.1 * feas_tol and dinf < 0.1 * feas_tol and relgap < gap_tol:
            status = "optimal"
            break
        # certificates of infeasibility: diverging dual / primal rays
        if dobj > 1e9 * (1 + np.linalg.norm(c - Rd)) and dinf < 1e-6:
            status = "infeasible"
            break
        if -pobj > 1e9 * (1 + np.linalg.norm(A @ xvec)) and pinf < 1e-6:
            status = "unbounded"
            break

        Rd_mats, rd_l = split_coef(Rd)
        Zis = []
        M = np.zeros((m, m))
        for p, Xb, Zb in zip(psd, Xs, Zs):
            Zi = np.linalg.inv(Zb)
            Zi = 0.5 * (Zi + Zi.conj().T)
            Zis.append(Zi)
            p.schur(M, Xb, Zi)
        if lp_idx.size:
            M += (A_lp @ sp.diags(xl / zl) @ A_lp.T).toarray()
        M = 0.5 * (M + M.T)
        try:
            msolve = _schur_solver(M)
        except np.linalg.LinAlgError:
            break

        def direction(Rcs, rc_l):
            hs = [Rc @ Zi - Xb @ Rdm @ Zi for Rc, Zi, Xb, Rdm in zip(Rcs, Zis, Xs, Rd_mats)]
            hl = (rc_l - xl * rd_l) / zl if lp_idx.size else xl
            rhs = Rp - A @ to_vec(hs, hl)
            dy = msolve(rhs)
            dz = Rd - AT @ dy
            dZs, dzl = split_coef(dz)
            dXs = []
            for Rc, Zi, Xb, dZ in zip(Rcs, Zis, Xs, dZs):
                dX = (Rc - Xb @ dZ) @ Zi
                dXs.append(0.5 * (dX + dX.conj().T))
            dxl = (rc_l - xl * dzl) / zl if lp_idx.size else xl
            return dXs, dxl, dy, dZs, dzl

        def steps(dXs, dxl, dZs, dzl):
            ap = min([_max_step_psd(Xb, dX) for Xb, dX in zip(Xs, dXs)]
                     + [_max_step_lp(xl, dxl)])
            ad = min([_max_step_psd(Zb, dZ) for Zb, dZ in zip(Zs, dZs)]
                     + [_max_step_lp(zl, dzl)])
            return ap, ad

        try:
            # predictor
            Rcs = [-(Xb @ Zb) for Xb, Zb in zip(Xs, Zs)]
            pred = direction(Rcs, -xl * zl)
            ap, ad = steps(pred[0], pred[1], pred[3], pred[4])
            ap, ad = min(1.0, ap), min(1.0, ad)
            gap_aff = sum(float(np.vdot(Zb + ad * dZ, Xb + ap * dX).real)
                          for Xb, Zb, dX, dZ in zip(Xs, Zs, pred[0], pred[3]))
            gap_aff += float((xl + ap * pred[1]) @ (zl + ad * pred[4]))
            sigma = min(1.0, max(0.0, gap_aff / gap) ** 3)
            # corrector
            Rcs = [sigma * mu * np.eye(p.d) - Xb @ Zb - dXp @ dZp
                   for p, Xb, Zb, dXp, dZp in zip(psd, Xs, Zs, pred[0], pred[3])]
            rc_l = sigma * mu - xl * zl - pred[1] * pred[4]
            dXs, dxl, dy, dZs, dzl = direction(Rcs, rc_l)
            ap, ad = steps(dXs, dxl, dZs, dzl)
        except np.linalg.LinAlgError:
            break
        tau = 0.9 + 0.09 * min(1.0, ap, ad)
        ap = min(1.0, tau * ap)
        ad = min(1.0, tau * ad)
        Xs = [Xb + ap * dX for Xb, dX in zip(Xs, dXs)]
        xl = xl + ap * dxl
        y = y + ad * dy
        Zs = [Zb + ad * dZ for Zb, dZ in zip(Zs, dZs)]
        zl = zl + ad * dzl
        if max(ap, ad) < 1e-12:
            break

    x = to_vec(Xs, xl)
    objective = float(prog.c @ x) + prog.offset
    viol = max_violation(prog, x)
    if status == "optimal" and viol > feas_tol:
        status = "numerical-failure"
    return ConicSolution(status=status, x=x, objective=objective,
                         gap=(pobj - dobj) if np.isfinite(pobj) else np.nan,
                         iterations=it, max_violation=viol, values=unpack(prog, x),
                         backend="ipm")

