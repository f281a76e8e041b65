"""Closed-form small-signal analysis of PI-PLL and IPLL synchronization.

Both loops reduce to a swing-like second-order equation

    J_e * d(omega)/dt = p_in - u_g*sin(delta) - D_e * (omega - omega_g)

For the PI-PLL the damping ``D_e`` contains ``cos(delta)`` and collapses as
the operating angle approaches 90 degrees; for the IPLL it is
``D - L_g*I_dref`` and does not depend on the angle at all.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .core import (
    DegenerateAngle,
    Eigenpair,
    EquivalentCoefficients,
    GridParams,
    InverterSetpoint,
    IpllGains,
    IpllLabError,
    NoEquilibrium,
    OperatingPoint,
    PiPllGains,
    SingularInertia,
    ZeroImpedance,
    p_in as _p_in,
    scr_from_grid,
)


class EmptyEnvelope(IpllLabError, ValueError):
    pass


class NotBracketed(IpllLabError, ValueError):
    pass


@dataclass(frozen=True)
class DampingBounds:
    lower_exact: float
    lower_conservative: float
    upper: float
    k_fluct: float


@dataclass(frozen=True)
class SweepRow:
    l_g: float
    scr: float
    delta_0: float
    d_e_pll: float
    d_e_ipll: float
    j_e_pll: float
    j_e_ipll: float
    equilibrium_exists: bool


class SecondOrder(NamedTuple):
    omega_n: float
    zeta: float
    omega_d: float


class CriticalPoint(NamedTuple):
    l_g: float
    equilibrium_exists: bool


# cos(pi/2) evaluates to ~6e-17, not zero
_COS_EPS = 1e-12


def bisect(f: Callable[[float], float], lo: float, hi: float,
           xtol: float = 1e-9, ftol: float = 0.0, maxiter: int = 200) -> float:
    """Root of ``f`` in ``[lo, hi]`` by bisection.

    Stops once the bracket is narrower than ``xtol`` and ``|f(mid)| <= ftol``
    (``ftol=0`` disables the residual test), or when the bracket can no
    longer shrink in floating point.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
        raise NotBracketed(f"f({lo:.6g}) = {flo:.3g} and f({hi:.6g}) = {fhi:.3g} share a sign")
    mid = 0.5 * (lo + hi)
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if hi - lo <= xtol and (ftol <= 0.0 or abs(fmid) <= ftol):
            return mid
        if mid in (lo, hi):
            return mid
        if math.copysign(1.0, fmid) == math.copysign(1.0, flo):
            lo, flo = mid, fmid
        else:
            hi = mid
    return mid


def solve_equilibrium(grid: GridParams, setpoint: InverterSetpoint,
                      rated_current: float | None = None) -> OperatingPoint:
    """Principal-branch equilibrium ``delta_0 = asin(p_in / u_g)``.

    The boundary ``|p_in| == u_g`` gives a marginal point at ``+-pi/2``.
    ``rated_current`` defaults to ``|i_dref|`` for the SCR field.
    """
    p = _p_in(grid, setpoint)
    if abs(p) > grid.u_g:
        raise NoEquilibrium(p, grid.u_g)
    marginal = abs(p) == grid.u_g
    delta_0 = math.copysign(math.pi / 2, p) if marginal else math.asin(p / grid.u_g)
    rated = abs(setpoint.i_dref) if rated_current is None else rated_current
    try:
        scr = scr_from_grid(grid, rated) if rated > 0 else math.inf
    except ZeroImpedance:
        scr = math.inf
    return OperatingPoint(delta_0=delta_0, p_in=p, scr=scr, marginal=marginal)


def pll_coefficients(grid: GridParams, setpoint: InverterSetpoint, gains: PiPllGains,
                     delta: float) -> EquivalentCoefficients:
    num = 1.0 - gains.k_ppll * grid.l_g * setpoint.i_dref
    if num == 0.0:
        raise SingularInertia("k_ppll * l_g * i_dref == 1 makes the PI-PLL inertia vanish")
    return EquivalentCoefficients(
        j_e=num / gains.k_ipll,
        d_e1=gains.k_ppll * grid.u_g * math.cos(delta) / gains.k_ipll,
        d_e2=grid.l_g * setpoint.i_dref,
    )


def ipll_coefficients(grid: GridParams, setpoint: InverterSetpoint,
                      gains: IpllGains) -> EquivalentCoefficients:
    # no angle argument: the IPLL coefficients are decoupled from delta
    if not gains.j > 0:
        raise ValueError(f"IPLL integral gain j must be positive, got {gains.j}")
    return EquivalentCoefficients(j_e=1.0 / gains.j, d_e1=gains.d,
                                  d_e2=grid.l_g * setpoint.i_dref)


def eigenvalues(coeffs: EquivalentCoefficients, grid: GridParams, delta_0: float) -> Eigenpair:
    """Roots of ``J_e s^2 + D_e s + u_g cos(delta_0)``."""
    a, b = coeffs.j_e, coeffs.d_e
    c = grid.u_g * math.cos(delta_0)
    if a == 0.0:
        raise SingularInertia("zero equivalent inertia")
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        root = cmath.sqrt(disc)
        l1 = (-b + root) / (2.0 * a)
        return Eigenpair(l1, l1.conjugate(), True)
    # real roots: cancellation-free form
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    if q == 0.0:
        return Eigenpair(0j, 0j, False)
    return Eigenpair(complex(q / a), complex(c / q), False)


def second_order_characteristics(coeffs: EquivalentCoefficients, grid: GridParams,
                                 delta_0: float) -> SecondOrder:
    k = grid.u_g * math.cos(delta_0)
    if not k > _COS_EPS * grid.u_g:
        raise DegenerateAngle(f"u_g*cos(delta_0) = {k:.3g} is not positive")
    if not coeffs.j_e > 0:
        raise SingularInertia(f"equivalent inertia {coeffs.j_e:.3g} is not positive")
    omega_n = math.sqrt(k / coeffs.j_e)
    zeta = coeffs.d_e / (2.0 * math.sqrt(coeffs.j_e * k))
    omega_d = omega_n * math.sqrt(1.0 - zeta * zeta) if abs(zeta) < 1.0 else 0.0
    return SecondOrder(omega_n, zeta, omega_d)


def damping_bounds(grid: GridParams, setpoint: InverterSetpoint, gains: IpllGains,
                   envelope: Sequence[tuple[GridParams, InverterSetpoint]] | None = None,
                   k_fluct: float = 2.0) -> DampingBounds:
    """Design bounds on the IPLL damping gain.

    ``envelope`` is the operating set over which ``L_g*I_dref`` is maximized;
    it defaults to the single queried point.  ``upper`` bounds the equivalent
    damping ``D_e`` (not ``D``) for an underdamped pair at the queried point.
    """
    if envelope is None:
        envelope = [(grid, setpoint)]
    if len(envelope) == 0:
        raise EmptyEnvelope("damping envelope is empty")
    for g, s in envelope:
        solve_equilibrium(g, s)
    lower_exact = max(g.l_g * s.i_dref for g, s in envelope)
    op = solve_equilibrium(grid, setpoint)
    k = grid.u_g * math.cos(op.delta_0)
    upper = 2.0 * math.sqrt(k / gains.j)
    return DampingBounds(
        lower_exact=lower_exact,
        lower_conservative=k_fluct * grid.u_g / grid.omega_0,
        upper=upper,
        k_fluct=k_fluct,
    )


def map_ipll_to_pll(ipll: IpllGains, grid: GridParams, setpoint: InverterSetpoint) -> PiPllGains:
    """PI gains giving the same ``J_e`` and ``D_e`` as ``ipll`` at this grid."""
    op = solve_equilibrium(grid, setpoint)
    k = grid.u_g * math.cos(op.delta_0)
    if op.marginal or not k > _COS_EPS * grid.u_g:
        raise DegenerateAngle("cos(delta_0) = 0: PI gains are undefined at the marginal point")
    k_ipll = ipll.j * k / (k + ipll.j * ipll.d * grid.l_g * setpoint.i_dref)
    return PiPllGains(k_ppll=ipll.d * k_ipll / k, k_ipll=k_ipll)


def damping_sweep(grid_template: GridParams, setpoint: InverterSetpoint, pll: PiPllGains,
                  ipll: IpllGains, l_g_range: tuple[float, float] = (1e-3, 12e-3),
                  n_points: int = 111) -> list[SweepRow]:
    """Equivalent damping of both loops over a uniform grid of ``l_g``.

    Gains stay fixed.  Rows without an equilibrium are kept and flagged;
    their angle-dependent columns are NaN.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    rows = []
    for l_g in np.linspace(l_g_range[0], l_g_range[1], n_points):
        l_g = float(l_g)
        g = grid_template.with_(l_g=l_g)
        c_ipll = ipll_coefficients(g, setpoint, ipll)
        j_e_pll = pll_coefficients(g, setpoint, pll, 0.0).j_e
        try:
            scr = scr_from_grid(g, abs(setpoint.i_dref)) if setpoint.i_dref else math.inf
        except ZeroImpedance:
            scr = math.inf
        try:
            op = solve_equilibrium(g, setpoint)
        except NoEquilibrium:
            rows.append(SweepRow(l_g, scr, math.nan, math.nan, c_ipll.d_e, j_e_pll,
                                 c_ipll.j_e, False))
            continue
        c_pll = pll_coefficients(g, setpoint, pll, op.delta_0)
        rows.append(SweepRow(l_g, scr, op.delta_0, c_pll.d_e, c_ipll.d_e, c_pll.j_e,
                             c_ipll.j_e, True))
    return rows


def critical_impedance(grid_template: GridParams, setpoint: InverterSetpoint,
                       gains: PiPllGains | IpllGains,
                       l_g_range: tuple[float, float] | None = None,
                       xtol: float = 1e-9, ftol: float = 1e-10) -> CriticalPoint:
    """Grid inductance at which the equivalent damping crosses zero.

    For the PI-PLL the default search range runs from the template's ``l_g``
    to just inside the equilibrium-existence boundary.  For the IPLL the root
    ``D / I_dref`` is found on the same terms but may lie beyond that
    boundary, which the returned flag reports.
    """
    l_max = _existence_boundary(grid_template, setpoint)
    if l_g_range is None:
        hi = l_max * (1.0 - 1e-9) if isinstance(gains, PiPllGains) else 10.0 * l_max
        l_g_range = (grid_template.l_g, hi)
    lo, hi = l_g_range

    if isinstance(gains, PiPllGains):
        def d_e(l_g):
            g = grid_template.with_(l_g=l_g)
            op = solve_equilibrium(g, setpoint)
            return pll_coefficients(g, setpoint, gains, op.delta_0).d_e
    else:
        def d_e(l_g):
            return ipll_coefficients(grid_template.with_(l_g=l_g), setpoint, gains).d_e

    root = bisect(d_e, lo, hi, xtol=xtol, ftol=ftol)
    try:
        solve_equilibrium(grid_template.with_(l_g=root), setpoint)
        exists = True
    except NoEquilibrium:
        exists = False
    return CriticalPoint(root, exists)


def _existence_boundary(grid: GridParams, setpoint: InverterSetpoint) -> float:
    """Largest ``l_g`` with ``|p_in| <= u_g`` (inf if the current does not load the grid)."""
    k = grid.omega_g * abs(setpoint.i_dref)
    if k == 0.0:
        return math.inf
    # |omega_g*l*I_d + r_g*I_q| = u_g, taking the root on the positive-slope side
    s = math.copysign(1.0, setpoint.i_dref)
    return (grid.u_g - s * grid.r_g * setpoint.i_qref) / k


def existence_boundary(grid: GridParams, setpoint: InverterSetpoint) -> float:
    """Grid inductance beyond which no equilibrium exists [H]."""
    return _existence_boundary(grid, setpoint)
