"""Parameter and state types for the reduced-order synchronization models.

Conventions
-----------
All voltages and currents are peak per-phase values (311 V peak for a
220 V-RMS phase), impedances in SI units (H, ohm), angles in rad and
frequencies in rad/s.  Every type is a frozen dataclass; functions in
this package never mutate their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

OMEGA_NOMINAL = 100.0 * math.pi  # 50 Hz


class IpllLabError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(IpllLabError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{v.field}: {v.message}" for v in self.violations)
        super().__init__(msg or "invalid parameters")


class ZeroImpedance(IpllLabError, ValueError):
    pass


class InfeasibleScr(IpllLabError, ValueError):
    pass


class SingularInertia(IpllLabError, ValueError):
    pass


class DegenerateAngle(IpllLabError, ValueError):
    pass


class NoEquilibrium(IpllLabError):
    """Raised when ``|p_in| > u_g``; ``margin`` is ``|p_in| - u_g`` in volts."""

    def __init__(self, p_in: float, u_g: float):
        self.p_in = p_in
        self.u_g = u_g
        self.margin = abs(p_in) - u_g
        super().__init__(
            f"no equilibrium: |p_in| = {abs(p_in):.6g} V exceeds u_g = {u_g:.6g} V "
            f"by {self.margin:.6g} V"
        )


@dataclass(frozen=True)
class GridParams:
    u_g: float = 311.0
    omega_g: float = OMEGA_NOMINAL
    omega_0: float = OMEGA_NOMINAL
    l_g: float = 4.1e-3
    r_g: float = 0.0

    def with_(self, **changes) -> "GridParams":
        return replace(self, **changes)

    @property
    def impedance(self) -> float:
        return math.hypot(self.r_g, self.omega_g * self.l_g)


@dataclass(frozen=True)
class InverterSetpoint:
    i_dref: float = 80.0
    i_qref: float = 0.0

    def with_(self, **changes) -> "InverterSetpoint":
        return replace(self, **changes)


@dataclass(frozen=True)
class PiPllGains:
    k_ppll: float
    k_ipll: float


@dataclass(frozen=True)
class IpllGains:
    j: float
    d: float


@dataclass(frozen=True)
class SyncState:
    delta_pll: float
    omega_pll: float


@dataclass(frozen=True)
class SignalPllState:
    delta_pll: float
    x_int: float


@dataclass(frozen=True)
class EquivalentCoefficients:
    """Inertia and damping of the second-order synchronization equation.

    ``d_e`` is always ``d_e1 - d_e2``; it is derived rather than stored so
    the identity cannot drift.
    """

    j_e: float
    d_e1: float
    d_e2: float

    @property
    def d_e(self) -> float:
        return self.d_e1 - self.d_e2


@dataclass(frozen=True)
class OperatingPoint:
    delta_0: float
    p_in: float
    scr: float
    marginal: bool = False


@dataclass(frozen=True)
class Eigenpair:
    lambda_1: complex
    lambda_2: complex
    is_conjugate: bool

    def __iter__(self):
        yield self.lambda_1
        yield self.lambda_2

    @property
    def max_real(self) -> float:
        return max(self.lambda_1.real, self.lambda_2.real)


class Violation(NamedTuple):
    field: str
    message: str


# Baseline study values (weak grid at SCR = 3).
BASELINE_GRID = GridParams()
BASELINE_SETPOINT = InverterSetpoint()
BASELINE_IPLL = IpllGains(j=20.0, d=2.0)
BASELINE_PLL = PiPllGains(k_ppll=0.1305, k_ipll=19.144)
WEAK_GRID_L_G = (8.8e-3, 9.5e-3, 10.3e-3, 11.25e-3)


def p_in(grid: GridParams, setpoint: InverterSetpoint) -> float:
    """Driving term of the synchronization equation [V]."""
    return grid.omega_g * grid.l_g * setpoint.i_dref + grid.r_g * setpoint.i_qref


def scr_from_grid(grid: GridParams, rated_current: float) -> float:
    """Short-circuit ratio ``u_g / (|Z_g| * rated_current)``."""
    if not rated_current > 0:
        raise ValueError(f"rated_current must be positive, got {rated_current}")
    z = grid.impedance
    if z == 0.0:
        raise ZeroImpedance("grid impedance is zero (l_g = r_g = 0); SCR is unbounded")
    return grid.u_g / (z * rated_current)


def grid_from_scr(
    scr: float,
    u_g: float = 311.0,
    omega_g: float = OMEGA_NOMINAL,
    rated_current: float = 80.0,
    r_g: float = 0.0,
    omega_0: float = OMEGA_NOMINAL,
) -> GridParams:
    """Grid whose inductance gives the requested SCR for a fixed ``r_g``."""
    if not scr > 0:
        raise ValueError(f"scr must be positive, got {scr}")
    if not rated_current > 0:
        raise ValueError(f"rated_current must be positive, got {rated_current}")
    z = u_g / (scr * rated_current)
    if r_g > z:
        raise InfeasibleScr(
            f"r_g = {r_g} ohm alone exceeds the impedance {z:.6g} ohm required for SCR = {scr}"
        )
    x = math.sqrt(z * z - r_g * r_g)
    return GridParams(u_g=u_g, omega_g=omega_g, omega_0=omega_0, l_g=x / omega_g, r_g=r_g)


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate(grid=None, setpoint=None, gains=None) -> list[Violation]:
    """Check type invariants; returns a (possibly empty) list of violations.

    Any argument may be ``None`` to skip it.  ``gains`` may be a
    :class:`PiPllGains` or :class:`IpllGains`.
    """
    out: list[Violation] = []

    def need(name, value, ok, msg):
        if not _finite(value):
            out.append(Violation(name, f"must be a finite number, got {value!r}"))
        elif not ok(value):
            out.append(Violation(name, msg))

    if grid is not None:
        need("u_g", grid.u_g, lambda v: v > 0, "must be > 0")
        need("omega_g", grid.omega_g, lambda v: v > 0, "must be > 0")
        need("omega_0", grid.omega_0, lambda v: v > 0, "must be > 0")
        need("l_g", grid.l_g, lambda v: v >= 0, "must be >= 0")
        need("r_g", grid.r_g, lambda v: v >= 0, "must be >= 0")
    if setpoint is not None:
        need("i_dref", setpoint.i_dref, lambda v: True, "")
        need("i_qref", setpoint.i_qref, lambda v: True, "")
    if isinstance(gains, PiPllGains):
        need("k_ipll", gains.k_ipll, lambda v: v > 0, "must be > 0")
        need("k_ppll", gains.k_ppll, lambda v: v >= 0, "must be >= 0")
        if grid is not None and setpoint is not None and not out:
            prod = gains.k_ppll * grid.l_g * setpoint.i_dref
            if math.isclose(prod, 1.0, rel_tol=1e-12, abs_tol=0.0):
                out.append(Violation(
                    "k_ppll", "singular inertia: k_ppll * l_g * i_dref == 1"
                ))
    elif isinstance(gains, IpllGains):
        need("j", gains.j, lambda v: v > 0, "must be > 0")
        need("d", gains.d, lambda v: v >= 0, "must be >= 0")
    elif gains is not None:
        out.append(Violation("gains", f"unsupported gains type {type(gains).__name__}"))
    return out


def check(grid=None, setpoint=None, gains=None) -> None:
    """Like :func:`validate` but raises :class:`ValidationError`."""
    violations = validate(grid, setpoint, gains)
    if violations:
        raise ValidationError(violations)
