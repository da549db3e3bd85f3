"""Adapter from :class:`ConicProgram` to Clarabel's ``b - A x in K`` form."""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from .program import ConicProgram, ConicSolution, max_violation, unpack

_SQRT2 = math.sqrt(2.0)
ALMOST_GAP = 1e-6


def embedding_svec_map(d: int, start: int = 0):
    """Triplets ``(row, col, val)`` with ``svec(embed(H)) = M @ params(H)``.

    ``svec`` stacks the upper triangle column by column and scales the
    off-diagonal entries by sqrt(2), which is Clarabel's PSD storage.
    """
    iu, ju = np.triu_indices(d, k=1)
    npair = iu.size
    diag = start + np.arange(d)
    re = start + d + np.arange(npair)
    im = start + d + npair + np.arange(npair)

    def pos(i, j):  # requires i <= j
        return j * (j + 1) // 2 + i

    di = np.arange(d)
    rows = [pos(di, di), pos(di + d, di + d),
            pos(iu, ju), pos(iu + d, ju + d),
            pos(iu, ju + d), pos(ju, iu + d)]
    cols = [diag, diag, re, re, im, im]
    vals = [np.ones(d), np.ones(d),
            np.full(npair, _SQRT2), np.full(npair, _SQRT2),
            np.full(npair, -_SQRT2), np.full(npair, _SQRT2)]
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def _assemble(prog: ConicProgram):
    import clarabel

    n = prog.num_vars
    mats = [prog.A.tocsc()]
    rhs = [prog.b]
    cones = []
    if prog.num_constraints:
        cones.append(clarabel.ZeroConeT(prog.num_constraints))
    for blk in prog.blocks:
        if blk.kind == "free":
            continue
        if blk.kind in ("nonneg", "soc"):
            idx = np.arange(blk.start, blk.start + blk.size)
            M = sp.coo_matrix((-np.ones(blk.size), (np.arange(blk.size), idx)),
                              shape=(blk.size, n))
            mats.append(M)
            rhs.append(np.zeros(blk.size))
            cones.append(clarabel.NonnegativeConeT(blk.size) if blk.kind == "nonneg"
                         else clarabel.SecondOrderConeT(blk.size))
        else:
            r, c, v = embedding_svec_map(blk.dim, blk.start)
            nrows = (2 * blk.dim) * (2 * blk.dim + 1) // 2
            mats.append(sp.coo_matrix((-v, (r, c)), shape=(nrows, n)))
            rhs.append(np.zeros(nrows))
            cones.append(clarabel.PSDTriangleConeT(2 * blk.dim))
    A = sp.vstack(mats).tocsc()
    b = np.concatenate(rhs)
    return A, b, cones


def solve_clarabel(prog: ConicProgram, feas_tol: float, gap_tol: float,
                   max_iter: int) -> ConicSolution:
    import clarabel

    A, b, cones = _assemble(prog)
    n = prog.num_vars
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_feas = min(1e-8, feas_tol)
    settings.tol_gap_abs = gap_tol
    settings.tol_gap_rel = gap_tol
    settings.max_threads = 1
    solver = clarabel.DefaultSolver(sp.csc_matrix((n, n)), prog.c, A, b, cones, settings)
    res = solver.solve()
    x = np.asarray(res.x, dtype=float)
    z = np.asarray(res.z, dtype=float)
    raw = str(res.status)

    pobj = float(prog.c @ x) + prog.offset
    dobj = -float(b @ z) + prog.offset
    viol = max_violation(prog, x)
    # "AlmostSolved" stops just short of the requested gap; accept it when the
    # primal point is feasible and the gap passes the 1e-6 sanity bound
    close = abs(pobj - dobj) <= ALMOST_GAP * (1.0 + abs(pobj))
    if raw == "Solved" or (raw == "AlmostSolved" and close):
        status = "optimal" if viol <= feas_tol else "numerical-failure"
    elif raw in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        status = "infeasible"
    elif raw in ("DualInfeasible", "AlmostDualInfeasible"):
        status = "unbounded"
    else:
        status = "numerical-failure"
    return ConicSolution(status=status, x=x, objective=pobj, gap=pobj - dobj,
                         iterations=int(res.iterations), max_violation=viol,
                         values=unpack(prog, x), backend="clarabel")
