"""Conic programs (LP / SOC / Hermitian PSD) and their solution."""

from __future__ import annotations

from .ipm import UnsupportedProgram, solve_ipm
from .program import (FEAS_TOL, GAP_TOL, MAX_ITER, STATUSES, Affine, Block, ConicProgram,
                      ConicSolution, HermitianVariable, ProgramBuilder, affine_sum,
                      coef_to_hermitian, embed_hermitian, hermitian_to_coef,
                      hermitian_to_params, hyperbolic_holds, hyperbolic_to_soc,
                      max_violation, params_to_hermitian, unembed_hermitian)

BACKENDS = ("auto", "clarabel", "ipm")


def solve(prog: ConicProgram, feas_tol: float = FEAS_TOL, gap_tol: float = GAP_TOL,
          max_iter: int = MAX_ITER, backend: str = "auto") -> ConicSolution:
    """Solve a conic program.

    ``"auto"`` uses the in-repo interior-point method when every block is
    ``psd`` or ``nonneg`` and Clarabel otherwise.  Infeasible and unbounded
    programs are reported through ``ConicSolution.status``.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "auto":
        ok = all(b.kind in ("psd", "nonneg") for b in prog.blocks)
        backend = "ipm" if ok and prog.num_constraints else "clarabel"
    if backend == "ipm":
        return solve_ipm(prog, feas_tol, gap_tol, max_iter)
    from .clarabel_backend import solve_clarabel

    return solve_clarabel(prog, feas_tol, gap_tol, max_iter)


__all__ = [
    "Affine", "Block", "ConicProgram", "ConicSolution", "HermitianVariable",
    "ProgramBuilder", "UnsupportedProgram", "affine_sum", "coef_to_hermitian",
    "embed_hermitian", "hermitian_to_coef", "hermitian_to_params", "hyperbolic_holds",
    "hyperbolic_to_soc", "max_violation", "params_to_hermitian", "solve", "unembed_hermitian",
    "FEAS_TOL", "GAP_TOL", "MAX_ITER", "STATUSES", "BACKENDS",
]
