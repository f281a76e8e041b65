import math

import pytest
from hypothesis import given, strategies as st

from ipll_lab import (
    GridParams,
    InfeasibleScr,
    InverterSetpoint,
    IpllGains,
    PiPllGains,
    ZeroImpedance,
    grid_from_scr,
    pll_coefficients,
    scr_from_grid,
    solve_equilibrium,
    validate,
)
from ipll_lab.analysis import bisect

from conftest import L_G_SCR1


def test_scr_baseline_calibration(grid):
    # 4.1 mH is the nominal SCR = 3 grid
    assert scr_from_grid(grid, 80.0) == pytest.approx(3.018, rel=1e-3)
    assert abs(scr_from_grid(grid, 80.0) - 3.0) / 3.0 < 0.01


def test_scr_one_at_closed_form_inductance(grid):
    g = grid.with_(l_g=12.374e-3)
    assert scr_from_grid(g, 80.0) == pytest.approx(1.000, abs=5e-4)
    # cross-check: SCR = 1 is where the equilibrium stops existing
    l_edge = bisect(lambda l: 311.0 - 100 * math.pi * l * 80.0, 1e-3, 20e-3, xtol=1e-15)
    assert l_edge == pytest.approx(L_G_SCR1, rel=1e-12)
    assert scr_from_grid(grid.with_(l_g=l_edge), 80.0) == pytest.approx(1.0, rel=1e-12)


def test_scr_halves_when_inductance_doubles(grid):
    assert scr_from_grid(grid.with_(l_g=8.2e-3), 80.0) == pytest.approx(
        scr_from_grid(grid, 80.0) / 2, rel=1e-14)


def test_scr_errors(grid):
    with pytest.raises(ZeroImpedance):
        scr_from_grid(grid.with_(l_g=0.0), 80.0)
    with pytest.raises(ValueError):
        scr_from_grid(grid, 0.0)


def test_grid_from_scr_examples():
    g = grid_from_scr(3.018121176925576, 311.0, 100 * math.pi, 80.0, 0.0)
    assert g.l_g == pytest.approx(4.1e-3, rel=1e-12)
    assert grid_from_scr(1.0, 311.0, 100 * math.pi, 80.0, 0.0).l_g == pytest.approx(L_G_SCR1, rel=1e-14)
    with pytest.raises(InfeasibleScr):
        grid_from_scr(3.0, 311.0, 100 * math.pi, 80.0, r_g=5.0)


def test_grid_round_trip(grid):
    back = grid_from_scr(scr_from_grid(grid, 80.0), grid.u_g, grid.omega_g, 80.0, grid.r_g)
    assert back.l_g == pytest.approx(grid.l_g, rel=1e-12)
    assert back.u_g == grid.u_g and back.r_g == grid.r_g


@given(scr=st.floats(0.5, 20.0), r_frac=st.floats(0.0, 0.9))
def test_scr_round_trip_property(scr, r_frac):
    z = 311.0 / (scr * 80.0)
    g = grid_from_scr(scr, 311.0, 100 * math.pi, 80.0, r_g=r_frac * z)
    assert scr_from_grid(g, 80.0) == pytest.approx(scr, rel=1e-9)


@given(scr=st.floats(1.0001, 20.0))
def test_sin_delta_is_inverse_scr(scr):
    g = grid_from_scr(scr)
    op = solve_equilibrium(g, InverterSetpoint(80.0, 0.0))
    assert math.sin(op.delta_0) == pytest.approx(1.0 / scr, rel=1e-12)


@given(l_g=st.floats(1e-4, 15e-3))
def test_scr_monotone_decreasing(l_g):
    g = GridParams(l_g=l_g)
    assert scr_from_grid(g.with_(l_g=l_g * 1.01), 80.0) < scr_from_grid(g, 80.0)


def test_validate_baseline_ok(grid, setpoint, pll, ipll):
    assert validate(grid, setpoint, pll) == []
    assert validate(grid, setpoint, ipll) == []


@pytest.mark.parametrize("gains,field", [
    (PiPllGains(0.1305, 0.0), "k_ipll"),
    (PiPllGains(-0.1, 19.0), "k_ppll"),
    (IpllGains(0.0, 2.0), "j"),
    (IpllGains(20.0, -1.0), "d"),
])
def test_validate_gain_violations(grid, setpoint, gains, field):
    assert [v.field for v in validate(grid, setpoint, gains)] == [field]


def test_validate_grid_violations(setpoint):
    bad = GridParams(u_g=-1.0, omega_g=0.0, l_g=-1e-3, r_g=float("nan"))
    fields = {v.field for v in validate(bad, setpoint)}
    assert fields == {"u_g", "omega_g", "l_g", "r_g"}
    assert validate(GridParams(u_g="311"), None)[0].field == "u_g"


def test_validate_singular_inertia(grid, setpoint):
    kp = 1.0 / (grid.l_g * setpoint.i_dref)
    v = validate(grid, setpoint, PiPllGains(kp, 19.144))
    assert len(v) == 1 and "singular inertia" in v[0].message
    # J_e itself goes to zero; its reciprocal, which scales the swing equation, diverges
    inv = [abs(1.0 / pll_coefficients(grid, setpoint, PiPllGains(kp * (1 - eps), 19.144), 0.0).j_e)
         for eps in (1e-2, 1e-4, 1e-6)]
    assert inv[0] < inv[1] < inv[2] and inv[2] > 1e6
