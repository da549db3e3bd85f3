"""Joint beamforming / power-splitting / IRS phase designs and no-IRS baselines."""

from ..design import Design
from .bcd import baseline_no_irs, bcd_mrt, bcd_sdr, bcd_zf, initial_phases, run_bcd
from .beamforming import (BeamStage, ZfStage, build_p2, build_p8, mrt_directions,
                          null_space_projectors, solve_p2, solve_p8, tight_ratios, zf_closed_form,
                          zf_constants, zf_residuals, zf_rho)
from .common import (RANK_ONE_TOL, BcdOptions, BcdTrace, DegenerateChannel, DesignError,
                     InfeasibleInstance, UnsupportedDimensions, extract_rank_one, rank_ratio)
from .phase import (PhaseStep, PhaseSubproblemData, build_p5, extract_phases, lift,
                    p3_margins, phase_data, phase_step)

__all__ = [
    "Design", "BcdOptions", "BcdTrace", "BeamStage", "ZfStage", "PhaseStep",
    "PhaseSubproblemData", "DesignError", "InfeasibleInstance", "DegenerateChannel",
    "UnsupportedDimensions", "RANK_ONE_TOL",
    "bcd_sdr", "bcd_mrt", "bcd_zf", "baseline_no_irs", "run_bcd", "initial_phases",
    "build_p2", "build_p5", "build_p8", "solve_p2", "solve_p8", "mrt_directions",
    "tight_ratios",
    "zf_closed_form", "zf_constants", "zf_rho", "zf_residuals", "null_space_projectors",
    "extract_rank_one", "extract_phases", "rank_ratio", "lift", "p3_margins",
    "phase_data", "phase_step",
]
