"""Pure-Python RK4 segment integrator (fallback for the compiled ``_rk4``)."""

import math

from .dynamics import SCALAR_RHS, ModelKind, _pll_signal_omega

_BY_CODE = {kind.code: kind for kind in ModelKind}


def integrate_segment(code, params, d, y, dt, n_steps, step0, decimation, out, pos):
    """Advance ``(d, y)`` by ``n_steps`` classical RK4 steps of size ``dt``.

    Before each step whose global index ``step0 + k`` is a multiple of
    ``decimation`` the row ``(delta, omega_pll, u_q)`` is written to
    ``out[pos]``.  Stops early on a non-finite state.

    Returns ``(d, y, steps_done, pos, finite)``.
    """
    kind = _BY_CODE[code]
    f = SCALAR_RHS[kind]
    P = tuple(float(p) for p in params)
    u_g, _, _, l_g, r_g, i_d, i_q = P[:7]
    signal_pll = kind is ModelKind.PLL_SIGNAL
    h2 = 0.5 * dt
    h6 = dt / 6.0
    isfinite = math.isfinite
    for k in range(n_steps):
        if (step0 + k) % decimation == 0:
            w = _pll_signal_omega(d, y, P) if signal_pll else y
            out[pos, 0] = d
            out[pos, 1] = w
            out[pos, 2] = w * l_g * i_d + r_g * i_q - u_g * math.sin(d)
            pos += 1
        try:
            a1, b1 = f(d, y, P)
            a2, b2 = f(d + h2 * a1, y + h2 * b1, P)
            a3, b3 = f(d + h2 * a2, y + h2 * b2, P)
            a4, b4 = f(d + dt * a3, y + dt * b3, P)
        except ValueError:
            # math.sin(inf) raises where C returns nan
            return math.nan, math.nan, k + 1, pos, False
        d = d + h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        y = y + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        if not (isfinite(d) and isfinite(y)):
            return d, y, k + 1, pos, False
    return d, y, n_steps, pos, True
