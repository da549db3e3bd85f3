"""Alternating optimisation of (beamformers, PS ratios) and IRS phases."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..channel import ChannelRealization, PhaseShifts, SystemConfig, effective_channels
from ..design import Design
from .beamforming import BeamStage, solve_p2, solve_p8, zf_closed_form
from .common import BcdOptions, BcdTrace, DesignError, log
from .phase import phase_step

StageFn = Callable[[SystemConfig, np.ndarray, BcdOptions], BeamStage]


def _stage_sdr(cfg, H, opts):
    return solve_p2(cfg, H, backend=opts.backend)


def _stage_mrt(cfg, H, opts):
    return solve_p8(cfg, H, backend=opts.backend)


def _stage_zf(cfg, H, opts):
    return zf_closed_form(cfg, H)


def initial_phases(n: int, opts: BcdOptions) -> PhaseShifts:
    if opts.init == "random" and n:
        rng = np.random.Generator(np.random.Philox(opts.init_seed))
        return PhaseShifts.from_angles(rng.uniform(0, 2 * np.pi, n))
    return PhaseShifts.ones(n)


def run_bcd(cfg: SystemConfig, real: ChannelRealization, stage: StageFn,
            opts: BcdOptions | None = None, guard: bool = False):
    """Generic alternating loop.

    Returns ``(design, trace)``; ``design`` is None when the first
    beamforming stage fails (``trace.status`` then carries the reason).
    The returned design always pairs the beamformers with the phases they
    were computed for.
    """
    opts = opts or BcdOptions()
    if opts.monotone_guard is not None:
        guard = opts.monotone_guard
    real.check(cfg)
    trace = BcdTrace()
    u = initial_phases(real.num_irs_elements, opts)
    try:
        st = stage(cfg, effective_channels(real, u), opts)
    except DesignError as exc:
        trace.status = exc.status
        trace.termination = f"{exc.status}-at-init"
        trace.notes.append(str(exc))
        return None, trace
    design = Design(st.W, u, st.rho)
    trace.objectives.append(design.power)
    trace.rank_ratios_w.append(st.rank_ratios)
    trace.notes.extend(st.notes)
    if real.num_irs_elements == 0:
        trace.termination = "no-irs"
        return design, trace

    trace.termination = "max-iterations"
    while trace.iterations < opts.max_iter:
        ps = phase_step(cfg, real, design.beamformers, design.ps_ratios,
                        weight=opts.margin_weight, tol=opts.accept_tol, backend=opts.backend)
        trace.margin_objectives.append(ps.margin_objective)
        trace.rank_ratios_v.append(ps.rank_ratio)
        trace.accepted.append(ps.phases is not None)
        if ps.phases is None:
            # both steps are deterministic, so retrying at the same phases
            # would reproduce this rejection: stop at the fixed point
            trace.notes.append(f"phase update rejected ({ps.status})")
            trace.termination = "phase-rejected"
            break
        try:
            st = stage(cfg, effective_channels(real, ps.phases), opts)
        except DesignError as exc:
            trace.notes.append(f"beam stage failed after phase update: {exc}")
            trace.termination = "stage-failed"
            break
        cand = Design(st.W, ps.phases, st.rho)
        prev = design.power
        if guard and cand.power > prev:
            trace.notes.append(f"objective rose to {cand.power:.6e}; kept previous design")
            trace.termination = "objective-increased"
            break
        design = cand
        trace.objectives.append(cand.power)
        trace.rank_ratios_w.append(st.rank_ratios)
        trace.notes.extend(st.notes)
        if abs(prev - cand.power) < opts.rel_tol * prev:
            trace.termination = "converged"
            break
    log.debug("bcd finished after %d stages (%s)", trace.iterations, trace.termination)
    return design, trace


def bcd_sdr(cfg: SystemConfig, real: ChannelRealization, opts: BcdOptions | None = None):
    """Relaxation-based beamforming alternated with the phase step."""
    return run_bcd(cfg, real, _stage_sdr, opts, guard=False)


def bcd_mrt(cfg: SystemConfig, real: ChannelRealization, opts: BcdOptions | None = None):
    """Maximum-ratio directions with cone power allocation, alternated with the phase step.

    Directions are recomputed from the new channels each round, so the
    objective is not guaranteed to decrease; by default the loop stops and
    keeps the previous design when it would increase.
    """
    return run_bcd(cfg, real, _stage_mrt, opts, guard=True)


def bcd_zf(cfg: SystemConfig, real: ChannelRealization, opts: BcdOptions | None = None):
    """Closed-form zero forcing alternated with the phase step (guarded like MRT)."""
    return run_bcd(cfg, real, _stage_zf, opts, guard=True)


BCD = {"optimal": bcd_sdr, "mrt": bcd_mrt, "zf": bcd_zf}


def baseline_no_irs(cfg: SystemConfig, real: ChannelRealization, variant: str = "optimal",
                    opts: BcdOptions | None = None):
    """Design on the direct channels only (reflected links ignored).

    Returns ``(design, trace)`` like the alternating designs; the design's
    phase vector is empty.
    """
    if variant not in BCD:
        raise ValueError(f"unknown baseline variant {variant!r}")
    return BCD[variant](cfg.with_(num_irs_elements=0), real.without_irs(), opts)
