import math

import pytest

from ipll_lab import GridParams, InverterSetpoint, IpllGains, PiPllGains

# Values computed independently (30-digit bisection on u_g*sin(d) - p_in, see
# test_analysis for the live oracle), frozen here.
DELTA0 = {
    4.1e-3: 0.33771492508989125,
    8.8e-3: 0.7911347740752498,
    9.5e-3: 0.87527600483548933,
    10.3e-3: 0.98337128550332828,
    11.25e-3: 1.1412206806568219,
}
L_G_SCR1 = 0.012374296825394862
MAPPED_PLL = PiPllGains(k_ppll=0.13048317598098636, k_ipll=19.144030365564729)
STUDY_L_G = (4.1e-3, 8.8e-3, 9.5e-3, 10.3e-3, 11.25e-3)


@pytest.fixture
def grid():
    return GridParams(u_g=311.0, omega_g=100 * math.pi, omega_0=100 * math.pi, l_g=4.1e-3, r_g=0.0)


@pytest.fixture
def setpoint():
    return InverterSetpoint(i_dref=80.0, i_qref=0.0)


@pytest.fixture
def ipll():
    return IpllGains(j=20.0, d=2.0)


@pytest.fixture
def pll():
    return PiPllGains(k_ppll=0.1305, k_ipll=19.144)
