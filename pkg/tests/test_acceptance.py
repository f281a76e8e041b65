"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]``/``[FAIL]`` line (shown even under
pytest's output capture).  Run this file directly for the summary alone:
``python tests/test_acceptance.py``.
"""

import math
import sys
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from ipll_lab import (
    GridParams,
    InverterSetpoint,
    IpllGains,
    NoEquilibrium,
    PiPllGains,
    SyncState,
    damping_sweep,
    eigenvalues,
    ipll_coefficients,
    map_ipll_to_pll,
    pll_coefficients,
    scr_from_grid,
    solve_equilibrium,
)
from ipll_lab.dynamics import (
    ModelKind,
    ipll_reduced_rhs,
    ipll_signal_rhs,
    jacobian_fd,
    native_state,
)
from ipll_lab.simulator import (
    Scenario,
    integrate,
    measure_damping,
    baseline_scenario,
    run_figure5,
    run_figure6_suite,
    verdict_table,
)

GRID = GridParams(u_g=311.0, omega_g=100 * math.pi, omega_0=100 * math.pi, l_g=4.1e-3, r_g=0.0)
SP = InverterSetpoint(80.0, 0.0)
IPLL = IpllGains(20.0, 2.0)
PLL = PiPllGains(0.1305, 19.144)
STUDY = (4.1e-3, 8.8e-3, 9.5e-3, 10.3e-3, 11.25e-3)


@pytest.fixture
def report(capsys):
    def emit(n, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {title}: {detail}")
        assert ok, detail
    return emit


def check_1():
    g = map_ipll_to_pll(IPLL, GRID, SP)
    ok = abs(g.k_ppll - 0.1305) <= 5e-4 and abs(g.k_ipll - 19.144) <= 1e-2
    return "gain mapping", ok, f"K_ppll={g.k_ppll:.6f}, K_ipll={g.k_ipll:.5f}"


def check_2():
    scr = scr_from_grid(GRID, 80.0)
    return "SCR calibration", abs(scr - 3.0) <= 0.06, f"SCR={scr:.5f}"


def check_3():
    d0 = solve_equilibrium(GRID, SP).delta_0
    a = pll_coefficients(GRID, SP, map_ipll_to_pll(IPLL, GRID, SP), d0)
    b = ipll_coefficients(GRID, SP, IPLL)
    # independent route: coefficients read off the finite-difference linearization
    jac = jacobian_fd(ModelKind.PLL_REDUCED, GRID, SP, map_ipll_to_pll(IPLL, GRID, SP),
                      (d0, GRID.omega_g))
    j_fd = GRID.u_g * math.cos(d0) / -jac[1][0]
    d_fd = -jac[1][1] * j_fd
    rel = lambda x, y: abs(x - y) / abs(y)
    ok = (rel(a.j_e, b.j_e) <= 1e-6 and rel(a.d_e, b.d_e) <= 1e-6
          and rel(a.j_e, 0.05) <= 1e-6 and rel(a.d_e, 1.672) <= 1e-6
          and rel(j_fd, 0.05) <= 1e-6 and rel(d_fd, 1.672) <= 1e-6)
    return ("coefficient equality", ok,
            f"J_e={a.j_e:.9g}/{b.j_e:.9g}, D_e={a.d_e:.9g}/{b.d_e:.9g}, FD=({j_fd:.9g}, {d_fd:.9g})")


def check_4():
    rows = damping_sweep(GRID, SP, PLL, IPLL, (1e-3, 12e-3), 111)
    l = np.array([r.l_g for r in rows])
    d_ip = np.array([r.d_e_ipll for r in rows])
    d_pl = np.array([r.d_e_pll for r in rows])
    second = float(np.max(np.abs(np.diff(d_ip, 2))))
    slope = np.polyfit(l, d_ip, 1)[0]
    flips = np.nonzero(np.diff(np.sign(d_pl)))[0]

    def f(x):
        d0 = math.asin(100 * math.pi * x * 80 / 311)
        return pll_coefficients(GRID.with_(l_g=x), SP, PLL, d0).d_e

    root = brentq(f, l[flips[0]], l[flips[0] + 1], xtol=1e-14) if len(flips) == 1 else math.nan
    ok = (second < 1e-12 and abs(slope + 80) < 1e-9 and len(flips) == 1
          and abs(root - 11.21e-3) <= 0.05e-3 and f(10.3e-3) > 0 and f(11.25e-3) < 0)
    return ("damping sweep", ok,
            f"max 2nd diff={second:.2e}, slope={slope:.6f}, sign changes={len(flips)}, "
            f"L_g*={root * 1e3:.4f} mH")


def check_5():
    t0 = time.perf_counter()
    runs = run_figure6_suite()
    table = verdict_table(runs)
    elapsed = time.perf_counter() - t0
    rates = [measure_damping(r.trajectory).decay_rate for r in runs
             if r.model is ModelKind.PLL_REDUCED and r.l_g < 11e-3]
    ok = (all(table[(l, "ipll_reduced")] == "Settled" for l in STUDY[1:])
          and all(table[(l, "pll_reduced")] == "Settled" for l in STUDY[1:4])
          and table[(11.25e-3, "pll_reduced")] == "Diverged"
          and rates[0] > rates[1] > rates[2] and elapsed < 30)
    pll_v = "/".join(table[(l, "pll_reduced")] for l in STUDY[1:])
    ipll_v = "/".join(table[(l, "ipll_reduced")] for l in STUDY[1:])
    return ("verdict table", ok,
            f"PI-PLL {pll_v}; IPLL {ipll_v}; decay {rates[0]:.3f}>{rates[1]:.3f}>"
            f"{rates[2]:.3f} 1/s; {elapsed:.2f} s")


def check_6():
    a, b = (r.trajectory for r in run_figure5(offset=0.1))
    d0 = solve_equilibrium(GRID, SP).delta_0
    peak = float(np.max(np.abs(b.delta - d0)))
    dev = float(np.max(np.abs(a.delta - b.delta)))
    return "response similarity", dev < 0.02 * peak, f"{100 * dev / peak:.3f} % of peak"


def check_7():
    est = measure_damping(integrate(baseline_scenario(ModelKind.IPLL_REDUCED, offset=0.1,
                                                   duration=1.0)))
    ok = abs(est.omega_d_est / 74.76 - 1) <= 0.05 and abs(est.zeta_est / 0.218 - 1) <= 0.10
    return ("eigenvalue/waveform", ok,
            f"omega_d={est.omega_d_est:.4f} rad/s, zeta={est.zeta_est:.4f} "
            f"({est.n_peaks_used} extrema)")


def check_8():
    d0 = solve_equilibrium(GRID, SP).delta_0
    sc = Scenario(ModelKind.PLL_REDUCED, GRID, SP, PLL, (d0 + 0.05, GRID.omega_g), 1.0, 10e-6,
                  decimation=1)
    a = integrate(sc)
    sig = native_state(ModelKind.PLL_SIGNAL, GRID, SP, PLL, d0 + 0.05, GRID.omega_g)
    b = integrate(sc.with_(model=ModelKind.PLL_SIGNAL, initial=sig))
    sup = float(np.max(np.abs(a.delta - b.delta)))
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10_000):
        st = SyncState(rng.uniform(-math.pi, math.pi), GRID.omega_g + rng.uniform(-30, 30))
        x = ipll_signal_rhs(GRID, SP, IPLL, st)
        y = ipll_reduced_rhs(GRID, SP, IPLL, st)
        worst = max(worst, abs(x.d_delta - y.d_delta), abs(x.d_second - y.d_second)
                    / (IPLL.j * GRID.u_g))
    ok = sup < 1e-6 and worst <= 1e-12
    return "model equivalence", ok, f"PI-PLL sup={sup:.2e} rad, IPLL max rel={worst:.2e}"


def check_9():
    worst = 0.0
    for l_g in STUDY:
        g = GRID.with_(l_g=l_g)
        d0 = solve_equilibrium(g, SP).delta_0
        for kind in ModelKind:
            gains = PLL if kind.is_pll else IPLL
            c = (pll_coefficients(g, SP, PLL, d0) if kind.is_pll
                 else ipll_coefficients(g, SP, IPLL))
            st = native_state(kind, g, SP, gains, d0, g.omega_g)
            fd = sorted(np.linalg.eigvals(np.array(jacobian_fd(kind, g, SP, gains, st))),
                        key=lambda z: z.imag)
            ref = sorted(eigenvalues(c, g, d0), key=lambda z: z.imag)
            worst = max(worst, max(abs(x - y) / abs(y) for x, y in zip(fd, ref)))
    base = baseline_scenario(ModelKind.IPLL_REDUCED, l_g=8.8e-3, offset=0.2, duration=0.2)
    runs = {dt: integrate(base.with_(dt=dt, decimation=dec)).delta
            for dt, dec in ((1e-3, 1), (5e-4, 2), (6.25e-5, 16))}
    ratio = (np.max(np.abs(runs[1e-3] - runs[6.25e-5]))
             / np.max(np.abs(runs[5e-4] - runs[6.25e-5])))
    ok = worst <= 1e-6 and 12 <= ratio <= 20
    return "numerical hygiene", ok, f"max eig rel err={worst:.2e}, RK4 ratio={ratio:.3f}"


def check_10():
    closed = 311.0 / (100 * math.pi * 80.0)

    def exists(l):
        try:
            solve_equilibrium(GRID.with_(l_g=l), SP)
            return True
        except NoEquilibrium:
            return False

    lo, hi = 12e-3, 13e-3
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if exists(mid) else (lo, mid)
    ok = (abs(hi - 12.374e-3) <= 0.01e-3 and abs(hi - closed) <= 1e-12
          and abs(scr_from_grid(GRID.with_(l_g=closed), 80.0) - 1) < 1e-12)
    return "existence boundary", ok, f"first NoEquilibrium at {hi * 1e3:.6f} mH (closed form {closed * 1e3:.6f})"


CHECKS = [check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8, check_9,
          check_10]


@pytest.mark.parametrize("n", range(1, 11))
def test_criterion(n, report):
    report(n, *CHECKS[n - 1]())


if __name__ == "__main__":
    failed = 0
    for n, chk in enumerate(CHECKS, 1):
        title, ok, detail = chk()
        failed += not ok
        print(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {title}: {detail}")
    sys.exit(1 if failed else 0)
