# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled RK4 kernels. Mirrors ``_rk4_py`` operation for operation."""

from libc.math cimport sin, cos, isfinite

import numpy as np

DEF NMAX = 8

CARTPOLE = 0
QUAD1D = 1
QUAD2D = 2

BACKEND = "cython"


cdef inline void _f_cartpole(const double* p, const double* x, const double* u,
                             const double* fe, double* out) noexcept nogil:
    cdef double m_c = p[0], m_p = p[1], l = p[2], g = p[3]
    cdef double total = m_c + m_p
    cdef double th = x[2]
    cdef double thd = x[3]
    cdef double s = sin(th)
    cdef double c = cos(th)
    cdef double temp = (u[0] + m_p * l * thd * thd * s) / total
    cdef double den = l * (4.0 / 3.0 - m_p * c * c / total)
    cdef double thdd = (g * s - c * temp) / den
    cdef double xdd = temp - m_p * l * thdd * c / total
    out[0] = x[1]
    out[1] = xdd + fe[0]
    out[2] = thd
    out[3] = thdd + fe[1]


cdef inline void _f_quad1d(const double* p, const double* x, const double* u,
                           const double* fe, double* out) noexcept nogil:
    cdef double m = p[0], g = p[1]
    out[0] = x[1]
    out[1] = u[0] / m - g + fe[0]


cdef inline void _f_quad2d(const double* p, const double* x, const double* u,
                           const double* fe, double* out) noexcept nogil:
    cdef double m = p[0], iyy = p[1], d = p[2], g = p[3]
    cdef double th = x[4]
    cdef double thrust = u[0] + u[1]
    out[0] = x[1]
    out[1] = sin(th) * thrust / m + fe[0]
    out[2] = x[3]
    out[3] = cos(th) * thrust / m - g + fe[1]
    out[4] = x[5]
    out[5] = (u[1] - u[0]) * d / iyy + fe[2]


cdef inline void _f(int system, const double* p, const double* x, const double* u,
                    const double* fe, double* out) noexcept nogil:
    if system == 0:
        _f_cartpole(p, x, u, fe, out)
    elif system == 1:
        _f_quad1d(p, x, u, fe, out)
    else:
        _f_quad2d(p, x, u, fe, out)


cdef void _load(object seq, double* buf, int cap) except *:
    cdef int i = 0
    for v in seq:
        if i >= cap:
            raise ValueError("vector too long for kernel buffer")
        buf[i] = <double>v
        i += 1


def rk4_integrate(int system, params, x, u, double dt, int nsteps, force):
    """Advance ``nsteps`` RK4 steps; returns ``(x_next list, ok)``."""
    cdef double p[NMAX]
    cdef double uu[NMAX]
    cdef double fe[NMAX]
    cdef double xs[NMAX]
    cdef double k1[NMAX]
    cdef double k2[NMAX]
    cdef double k3[NMAX]
    cdef double k4[NMAX]
    cdef double tmp[NMAX]
    cdef int n = len(x)
    cdef int i, step
    cdef bint ok = True
    cdef double half = 0.5 * dt
    cdef double sixth = dt / 6.0
    if n > NMAX:
        raise ValueError("state too large for kernel")
    for i in range(NMAX):
        p[i] = 0.0
        uu[i] = 0.0
        fe[i] = 0.0
    _load(params, p, NMAX)
    _load(u, uu, NMAX)
    _load(force, fe, NMAX)
    _load(x, xs, NMAX)
    with nogil:
        for step in range(nsteps):
            _f(system, p, xs, uu, fe, k1)
            for i in range(n):
                tmp[i] = xs[i] + half * k1[i]
            _f(system, p, tmp, uu, fe, k2)
            for i in range(n):
                tmp[i] = xs[i] + half * k2[i]
            _f(system, p, tmp, uu, fe, k3)
            for i in range(n):
                tmp[i] = xs[i] + dt * k3[i]
            _f(system, p, tmp, uu, fe, k4)
            for i in range(n):
                xs[i] = xs[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not isfinite(xs[i]):
                    ok = False
            if not ok:
                break
    return [xs[i] for i in range(n)], ok


def rhs(int system, params, x, u, force):
    cdef double p[NMAX]
    cdef double uu[NMAX]
    cdef double fe[NMAX]
    cdef double xs[NMAX]
    cdef double out[NMAX]
    cdef int n = len(x)
    cdef int i
    for i in range(NMAX):
        p[i] = 0.0
        uu[i] = 0.0
        fe[i] = 0.0
    _load(params, p, NMAX)
    _load(u, uu, NMAX)
    _load(force, fe, NMAX)
    _load(x, xs, NMAX)
    _f(system, p, xs, uu, fe, out)
    return [out[i] for i in range(n)]
