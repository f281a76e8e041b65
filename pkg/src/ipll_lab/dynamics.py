"""Right-hand sides of the four synchronization models.

Reduced models integrate ``(delta, omega_pll)`` directly.  Signal-level
models follow the controller block diagrams driven by the PCC q-axis
voltage ``u_q``; the PI-PLL signal model carries the integrator output
``x_int`` as its second state and resolves ``omega_pll`` algebraically.

The current loop is ideal: inverter currents equal their references.

Each model has a scalar kernel ``_<kind>(d, y, P)`` operating on floats and
a flat parameter tuple ``P = (u_g, omega_g, omega_0, l_g, r_g, i_dref,
i_qref, g1, g2)``, where ``(g1, g2)`` is ``(k_ppll, k_ipll)`` or ``(j, d)``.
The compiled integrator mirrors these kernels line by line.
"""

from __future__ import annotations

import enum
import math
from typing import NamedTuple

from .core import (
    GridParams,
    InverterSetpoint,
    IpllGains,
    PiPllGains,
    SignalPllState,
    SingularInertia,
    SyncState,
)


class ModelKind(enum.Enum):
    PLL_REDUCED = "pll_reduced"
    IPLL_REDUCED = "ipll_reduced"
    PLL_SIGNAL = "pll_signal"
    IPLL_SIGNAL = "ipll_signal"

    @property
    def code(self) -> int:
        return _CODES[self]

    @property
    def is_pll(self) -> bool:
        return self in (ModelKind.PLL_REDUCED, ModelKind.PLL_SIGNAL)

    @property
    def is_signal(self) -> bool:
        return self in (ModelKind.PLL_SIGNAL, ModelKind.IPLL_SIGNAL)


_CODES = {
    ModelKind.PLL_REDUCED: 0,
    ModelKind.IPLL_REDUCED: 1,
    ModelKind.PLL_SIGNAL: 2,
    ModelKind.IPLL_SIGNAL: 3,
}


class StateDerivative(NamedTuple):
    d_delta: float
    d_second: float


def pack_params(grid: GridParams, setpoint: InverterSetpoint, gains) -> tuple:
    if isinstance(gains, PiPllGains):
        g1, g2 = gains.k_ppll, gains.k_ipll
    else:
        g1, g2 = gains.j, gains.d
    return (float(grid.u_g), float(grid.omega_g), float(grid.omega_0), float(grid.l_g),
            float(grid.r_g), float(setpoint.i_dref), float(setpoint.i_qref),
            float(g1), float(g2))


# -- scalar kernels -----------------------------------------------------------

def _pll_reduced(d, w, P):
    u_g, w_g, _, l_g, r_g, i_d, i_q, kp, ki = P
    j_e = (1.0 - kp * l_g * i_d) / ki
    d_e = kp * u_g * math.cos(d) / ki - l_g * i_d
    slip = w - w_g
    return slip, (w_g * l_g * i_d + r_g * i_q - u_g * math.sin(d) - d_e * slip) / j_e


def _ipll_reduced(d, w, P):
    u_g, w_g, _, l_g, r_g, i_d, i_q, j, dd = P
    slip = w - w_g
    return slip, j * (w_g * l_g * i_d + r_g * i_q - u_g * math.sin(d) - (dd - l_g * i_d) * slip)


def _pll_signal_omega(d, x, P):
    u_g, _, w_0, l_g, r_g, i_d, i_q, kp, _ = P
    return (w_0 + x + kp * (r_g * i_q - u_g * math.sin(d))) / (1.0 - kp * l_g * i_d)


def _pll_signal(d, x, P):
    u_g, w_g, w_0, l_g, r_g, i_d, i_q, kp, ki = P
    w = (w_0 + x + kp * (r_g * i_q - u_g * math.sin(d))) / (1.0 - kp * l_g * i_d)
    u_q = w * l_g * i_d + r_g * i_q - u_g * math.sin(d)
    return w - w_g, ki * u_q


def _ipll_signal(d, w, P):
    u_g, w_g, w_0, l_g, r_g, i_d, i_q, j, dd = P
    u_q = w * l_g * i_d + r_g * i_q - u_g * math.sin(d)
    return w - w_g, j * (u_q - dd * (w - w_0))


SCALAR_RHS = {
    ModelKind.PLL_REDUCED: _pll_reduced,
    ModelKind.IPLL_REDUCED: _ipll_reduced,
    ModelKind.PLL_SIGNAL: _pll_signal,
    ModelKind.IPLL_SIGNAL: _ipll_signal,
}


# -- public typed wrappers ----------------------------------------------------

def pcc_uq(grid: GridParams, setpoint: InverterSetpoint, delta: float, omega_pll: float) -> float:
    """PCC q-axis voltage seen in the PLL frame [V]."""
    return (omega_pll * grid.l_g * setpoint.i_dref + grid.r_g * setpoint.i_qref
            - grid.u_g * math.sin(delta))


def _require_pll_inertia(grid, setpoint, gains):
    if 1.0 - gains.k_ppll * grid.l_g * setpoint.i_dref == 0.0:
        raise SingularInertia("k_ppll * l_g * i_dref == 1")


def pll_reduced_rhs(grid, setpoint, gains: PiPllGains, state: SyncState) -> StateDerivative:
    _require_pll_inertia(grid, setpoint, gains)
    return StateDerivative(*_pll_reduced(state.delta_pll, state.omega_pll,
                                         pack_params(grid, setpoint, gains)))


def ipll_reduced_rhs(grid, setpoint, gains: IpllGains, state: SyncState) -> StateDerivative:
    if not gains.j > 0:
        raise ValueError("IPLL integral gain j must be positive")
    return StateDerivative(*_ipll_reduced(state.delta_pll, state.omega_pll,
                                          pack_params(grid, setpoint, gains)))


def pll_signal_omega(grid, setpoint, gains: PiPllGains, state: SignalPllState) -> float:
    """Resolve ``omega = omega_0 + k_ppll*u_q(omega) + x_int`` for ``omega``."""
    _require_pll_inertia(grid, setpoint, gains)
    return _pll_signal_omega(state.delta_pll, state.x_int, pack_params(grid, setpoint, gains))


def pll_signal_rhs(grid, setpoint, gains: PiPllGains, state: SignalPllState) -> StateDerivative:
    _require_pll_inertia(grid, setpoint, gains)
    return StateDerivative(*_pll_signal(state.delta_pll, state.x_int,
                                        pack_params(grid, setpoint, gains)))


def ipll_signal_rhs(grid, setpoint, gains: IpllGains, state: SyncState) -> StateDerivative:
    # damping branch references omega_0: the controller cannot measure omega_g
    if not gains.j > 0:
        raise ValueError("IPLL integral gain j must be positive")
    return StateDerivative(*_ipll_signal(state.delta_pll, state.omega_pll,
                                         pack_params(grid, setpoint, gains)))


def rhs(kind: ModelKind, grid, setpoint, gains, state) -> StateDerivative:
    """Dispatch on ``kind``; ``state`` is a pair in the model's native coordinates."""
    d, y = _as_pair(state)
    if kind.is_pll:
        if not isinstance(gains, PiPllGains):
            raise TypeError(f"{kind.value} needs PiPllGains")
        _require_pll_inertia(grid, setpoint, gains)
    elif not isinstance(gains, IpllGains):
        raise TypeError(f"{kind.value} needs IpllGains")
    return StateDerivative(*SCALAR_RHS[kind](d, y, pack_params(grid, setpoint, gains)))


def _as_pair(state):
    if isinstance(state, SyncState):
        return state.delta_pll, state.omega_pll
    if isinstance(state, SignalPllState):
        return state.delta_pll, state.x_int
    d, y = state
    return float(d), float(y)


def native_state(kind: ModelKind, grid, setpoint, gains, delta: float, omega_pll: float):
    """Map ``(delta, omega_pll)`` into the model's native state pair."""
    if kind is ModelKind.PLL_SIGNAL:
        # invert the algebraic loop for the integrator output
        _require_pll_inertia(grid, setpoint, gains)
        u_q = pcc_uq(grid, setpoint, delta, omega_pll)
        return (delta, omega_pll - grid.omega_0 - gains.k_ppll * u_q)
    return (delta, omega_pll)


def omega_of(kind: ModelKind, grid, setpoint, gains, state) -> float:
    """``omega_pll`` for a native state pair."""
    d, y = _as_pair(state)
    if kind is ModelKind.PLL_SIGNAL:
        return _pll_signal_omega(d, y, pack_params(grid, setpoint, gains))
    return y


def jacobian_fd(kind: ModelKind, grid, setpoint, gains, state, step: float = 1e-6):
    """Central finite-difference Jacobian of the native right-hand side (2x2 list)."""
    d, y = _as_pair(state)
    f = SCALAR_RHS[kind]
    P = pack_params(grid, setpoint, gains)
    cols = []
    for i in range(2):
        hp = [d, y]
        hm = [d, y]
        h = step * max(1.0, abs(hp[i]))
        hp[i] += h
        hm[i] -= h
        fp = f(hp[0], hp[1], P)
        fm = f(hm[0], hm[1], P)
        cols.append([(fp[k] - fm[k]) / (2.0 * h) for k in range(2)])
    return [[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]]
