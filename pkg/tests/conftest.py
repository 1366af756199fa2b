import numpy as np
import pytest

from jrc_rsp.params import RadarParams, TargetSpec


@pytest.fixture
def small():
    """Tiny geometry: 64 samples, 16-chip Golay, 4 antennas, 8 packets, 10 deg grid."""
    return RadarParams(K=64, golay_len=16, Q=4, N=8, delta_phi_deg=10.0, D=33,
                       range_gate_m=(0.0, 4.0))


@pytest.fixture
def ci_params():
    from jrc_rsp.params import load_scenario

    return load_scenario("ci").params


def on_grid_target(params, k, az_bin, v_bin, amp=1.0, rcs=1.0):
    from jrc_rsp.params import derive

    der = derive(params)
    return TargetSpec(k * params.range_res, float(der.azimuth_deg[az_bin]),
                      float(der.velocity_mps[v_bin]), rcs, fixed_amplitude=amp)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance verdicts, echoed at the end of the run even when output is captured
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
