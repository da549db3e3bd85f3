import numpy as np
import pytest
from conftest import scalar_realization, unit_config
from hypothesis import given
from hypothesis import strategies as st
from oracles import qos_by_loops

from irs_swipt.channel import PhaseShifts, SystemConfig, draw_realization, effective_channels
from irs_swipt.design import Design
from irs_swipt.metrics import harvested_power, leakage, qos_check, sinr


def _design(W, rho, n=0, theta=None):
    u = PhaseShifts.ones(n) if theta is None else PhaseShifts.from_angles(theta)
    return Design(np.atleast_2d(W), u, rho)


def test_sinr_scalar_example():
    # rho=1/2, |h^H w|^2 = 2, sigma^2 = 1, delta^2 = 1/2 -> 1
    cfg = unit_config(id_noise_dbm=30 + 10 * np.log10(0.5))
    d = _design([[np.sqrt(2)]], [0.5])
    assert sinr(d, scalar_realization(), cfg, 0) == pytest.approx(1.0)
    assert sinr(_design([[0.0]], [0.5]), scalar_realization(), cfg, 0) == 0.0


def test_harvested_scalar_examples():
    cfg = unit_config(eh_efficiency=0.5)
    d = _design([[2.0]], [0.5])
    assert harvested_power(d, scalar_realization(), cfg, 0) == pytest.approx(1.0)
    vals = [harvested_power(_design([[2.0]], [r]), scalar_realization(), cfg, 0)
            for r in (0.9, 0.99, 0.999999)]
    assert vals[-1] < 1e-5 and vals == sorted(vals, reverse=True)


@given(st.integers(0, 10_000))
def test_metrics_match_independent_oracle(seed):
    cfg = SystemConfig(num_irs_elements=6)
    real = draw_realization(cfg, seed)
    rng = np.random.default_rng(seed)
    W = (rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))) * 1e-2
    theta = rng.uniform(0, 2 * np.pi, 6)
    rho = rng.uniform(0.05, 0.95, 2)
    d = _design(W, rho, theta=theta)
    s, e = qos_by_loops(W, real, cfg, np.exp(1j * theta), rho)
    np.testing.assert_allclose(sinr(d, real, cfg), s, rtol=1e-10)
    np.testing.assert_allclose(harvested_power(d, real, cfg), e, rtol=1e-10)


@given(st.integers(0, 10_000), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_global_phase_invariance(seed, a, b):
    cfg = SystemConfig(num_irs_elements=5)
    real = draw_realization(cfg, seed)
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
    d1 = _design(W, [0.3, 0.6], n=5)
    d2 = _design(W * np.exp(1j * np.array([a, b]))[:, None], [0.3, 0.6], n=5)
    np.testing.assert_allclose(sinr(d1, real, cfg), sinr(d2, real, cfg), rtol=1e-12)
    np.testing.assert_allclose(harvested_power(d1, real, cfg), harvested_power(d2, real, cfg),
                               rtol=1e-12)


@given(st.integers(0, 1000), st.floats(0.01, 0.98), st.floats(0.001, 0.01))
def test_monotone_in_rho(seed, r, dr):
    cfg = SystemConfig(num_irs_elements=0)
    real = draw_realization(cfg, seed)
    W = np.random.default_rng(seed).standard_normal((2, 4)).astype(complex)
    lo, hi = _design(W, [r, r]), _design(W, [r + dr, r + dr])
    assert np.all(sinr(hi, real, cfg) >= sinr(lo, real, cfg))
    assert np.all(harvested_power(hi, real, cfg) <= harvested_power(lo, real, cfg))


def test_no_irs_and_zero_reflection_coincide():
    from irs_swipt.channel import ChannelRealization
    cfg = SystemConfig(num_irs_elements=7)
    real = draw_realization(cfg, 2)
    zero = ChannelRealization(real.h_direct, np.zeros_like(real.h_irs_user), real.H_bs_irs,
                              seed=None)
    W = np.ones((2, 4), complex) * 1e-2
    a = qos_check(_design(W, [0.4, 0.5], n=7), zero, cfg)
    b = qos_check(_design(W, [0.4, 0.5]), real.without_irs(), cfg.with_(num_irs_elements=0))
    np.testing.assert_allclose(a.sinr, b.sinr, rtol=1e-14)
    np.testing.assert_allclose(a.harvested, b.harvested, rtol=1e-14)


def test_qos_boundary_design_has_zero_margins():
    # K=1 design built from the two equalities: rho^2 + rho - 1 = 0 for unit parameters
    cfg = unit_config()
    rho = (np.sqrt(5) - 1) / 2
    p = 1.0 + 1.0 / rho  # gamma (sigma^2 + delta^2 / rho)
    rep = qos_check(_design([[np.sqrt(p)]], [rho]), scalar_realization(), cfg)
    assert abs(rep.sinr_margin[0]) < 1e-9 and abs(rep.eh_margin[0]) < 1e-9
    assert rep.feasible and rep.worst_violation < 1e-9
    assert rep.power == pytest.approx(p)
    assert rep.rate[0] == pytest.approx(1.0)
    assert rep.sinr_db[0] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("rho", [0.0, 1.0])
def test_qos_flags_structural_rho(rho):
    rep = qos_check(_design([[100.0]], [rho]), scalar_realization(), unit_config())
    assert not rep.feasible and rep.structural


def test_qos_infeasible_and_dimension_errors():
    rep = qos_check(_design([[0.1]], [0.5]), scalar_realization(), unit_config())
    assert not rep.feasible and rep.min_sinr_margin < 0 and rep.worst_violation > 0
    with pytest.raises(ValueError):
        qos_check(_design([[1.0, 1.0]], [0.5]), scalar_realization(), unit_config())
    cfg = SystemConfig(num_irs_elements=4)
    real = draw_realization(cfg, 0)
    with pytest.raises(ValueError):
        qos_check(_design(np.ones((2, 4)), [0.5, 0.5], n=3), real, cfg)


def test_leakage_of_nulling_beamformers():
    cfg = SystemConfig(num_irs_elements=0)
    real = draw_realization(cfg, 5)
    H = effective_channels(real, None)
    W = np.linalg.pinv(H.conj()).T  # H^* W^T = I -> h_k^H w_i = delta_ki
    d = _design(W, [0.5, 0.5])
    assert leakage(d, real) < 1e-18
    assert leakage(_design(np.ones((2, 4)), [0.5, 0.5]), real) > 1e-6
    assert leakage(_design([[1.0]], [0.5]), scalar_realization()) == 0.0
