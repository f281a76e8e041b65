# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled RK4 segment integrator.

Same contract as ``ipll_lab._rk4_py.integrate_segment``; the right-hand
sides below mirror the scalar kernels in ``ipll_lab.dynamics``.
"""

from libc.math cimport sin, cos, isfinite


cdef struct Params:
    double u_g, w_g, w_0, l_g, r_g, i_d, i_q, g1, g2


cdef inline void rhs(int code, double d, double y, Params* P,
                     double* dd, double* dy) noexcept nogil:
    cdef double slip, j_e, d_e, w, u_q
    if code == 0:
        # PI-PLL reduced
        j_e = (1.0 - P.g1 * P.l_g * P.i_d) / P.g2
        d_e = P.g1 * P.u_g * cos(d) / P.g2 - P.l_g * P.i_d
        slip = y - P.w_g
        dd[0] = slip
        dy[0] = (P.w_g * P.l_g * P.i_d + P.r_g * P.i_q - P.u_g * sin(d) - d_e * slip) / j_e
    elif code == 1:
        # IPLL reduced
        slip = y - P.w_g
        dd[0] = slip
        dy[0] = P.g1 * (P.w_g * P.l_g * P.i_d + P.r_g * P.i_q - P.u_g * sin(d)
                        - (P.g2 - P.l_g * P.i_d) * slip)
    elif code == 2:
        # PI-PLL signal level, state (delta, x_int)
        w = (P.w_0 + y + P.g1 * (P.r_g * P.i_q - P.u_g * sin(d))) / (1.0 - P.g1 * P.l_g * P.i_d)
        u_q = w * P.l_g * P.i_d + P.r_g * P.i_q - P.u_g * sin(d)
        dd[0] = w - P.w_g
        dy[0] = P.g2 * u_q
    else:
        # IPLL signal level
        u_q = y * P.l_g * P.i_d + P.r_g * P.i_q - P.u_g * sin(d)
        dd[0] = y - P.w_g
        dy[0] = P.g1 * (u_q - P.g2 * (y - P.w_0))


cdef inline double omega_of(int code, double d, double y, Params* P) noexcept nogil:
    if code == 2:
        return (P.w_0 + y + P.g1 * (P.r_g * P.i_q - P.u_g * sin(d))) / (1.0 - P.g1 * P.l_g * P.i_d)
    return y


def integrate_segment(int code, params, double d, double y, double dt, long n_steps,
                      long step0, long decimation, double[:, ::1] out, long pos):
    cdef Params P
    P.u_g, P.w_g, P.w_0, P.l_g, P.r_g, P.i_d, P.i_q, P.g1, P.g2 = [float(p) for p in params]
    cdef double a1, b1, a2, b2, a3, b3, a4, b4, w
    cdef double h2 = 0.5 * dt
    cdef double h6 = dt / 6.0
    cdef long k
    cdef long done = n_steps
    cdef bint finite = True
    with nogil:
        for k in range(n_steps):
            if (step0 + k) % decimation == 0:
                w = omega_of(code, d, y, &P)
                out[pos, 0] = d
                out[pos, 1] = w
                out[pos, 2] = w * P.l_g * P.i_d + P.r_g * P.i_q - P.u_g * sin(d)
                pos += 1
            rhs(code, d, y, &P, &a1, &b1)
            rhs(code, d + h2 * a1, y + h2 * b1, &P, &a2, &b2)
            rhs(code, d + h2 * a2, y + h2 * b2, &P, &a3, &b3)
            rhs(code, d + dt * a3, y + dt * b3, &P, &a4, &b4)
            d = d + h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            y = y + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            if not (isfinite(d) and isfinite(y)):
                done = k + 1
                finite = False
                break
    return d, y, done, pos, finite
