import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from irs_swipt.channel import ChannelRealization, SystemConfig

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance criteria append "(n, passed, detail)" here; printed at the end of the run
ACCEPTANCE_LINES: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")


def unit_config(**kw) -> SystemConfig:
    """K=1, M=1, N=0 with every parameter equal to one in linear units."""
    base = dict(num_bs_antennas=1, num_irs_elements=0, num_users=1, sinr_target_db=0.0,
                eh_target_dbm=30.0, antenna_noise_dbm=30.0, id_noise_dbm=30.0,
                eh_efficiency=1.0)
    base.update(kw)
    return SystemConfig(**base)


def scalar_realization(h=1.0) -> ChannelRealization:
    return ChannelRealization(np.array([[h]], dtype=complex), np.zeros((1, 0)),
                              np.zeros((0, 1)), seed=None)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
