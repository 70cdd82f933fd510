"""Pure-Python RK4 kernels, used when the compiled extension is unavailable.

Arithmetic is written in the same order as ``_rk4.pyx`` so both backends
produce bit-identical results (the extension is built without FMA
contraction).
"""

from math import cos, isfinite, sin

CARTPOLE = 0
QUAD1D = 1
QUAD2D = 2

BACKEND = "python"


def _f_cartpole(p, x, u, fe, out):
    m_c, m_p, l, g = p[0], p[1], p[2], p[3]
    total = m_c + m_p
    th = x[2]
    thd = x[3]
    s = sin(th)
    c = cos(th)
    temp = (u[0] + m_p * l * thd * thd * s) / total
    den = l * (4.0 / 3.0 - m_p * c * c / total)
    thdd = (g * s - c * temp) / den
    xdd = temp - m_p * l * thdd * c / total
    out[0] = x[1]
    out[1] = xdd + fe[0]
    out[2] = thd
    out[3] = thdd + fe[1]


def _f_quad1d(p, x, u, fe, out):
    m, g = p[0], p[1]
    out[0] = x[1]
    out[1] = u[0] / m - g + fe[0]


def _f_quad2d(p, x, u, fe, out):
    m, iyy, d, g = p[0], p[1], p[2], p[3]
    th = x[4]
    thrust = u[0] + u[1]
    out[0] = x[1]
    out[1] = sin(th) * thrust / m + fe[0]
    out[2] = x[3]
    out[3] = cos(th) * thrust / m - g + fe[1]
    out[4] = x[5]
    out[5] = (u[1] - u[0]) * d / iyy + fe[2]


_RHS = {CARTPOLE: _f_cartpole, QUAD1D: _f_quad1d, QUAD2D: _f_quad2d}


def rk4_integrate(system, params, x, u, dt, nsteps, force):
    """Advance ``nsteps`` RK4 steps of size ``dt`` with input and force held.

    Returns ``(x_next, ok)``; ``ok`` is False as soon as the state becomes
    non-finite, in which case integration stops early.
    """
    f = _RHS[system]
    p = [float(v) for v in params]
    uu = [float(v) for v in u]
    fe = [float(v) for v in force]
    n = len(x)
    xs = [float(v) for v in x]
    k1 = [0.0] * n
    k2 = [0.0] * n
    k3 = [0.0] * n
    k4 = [0.0] * n
    tmp = [0.0] * n
    half = 0.5 * dt
    sixth = dt / 6.0
    for _ in range(nsteps):
        f(p, xs, uu, fe, k1)
        for i in range(n):
            tmp[i] = xs[i] + half * k1[i]
        f(p, tmp, uu, fe, k2)
        for i in range(n):
            tmp[i] = xs[i] + half * k2[i]
        f(p, tmp, uu, fe, k3)
        for i in range(n):
            tmp[i] = xs[i] + dt * k3[i]
        f(p, tmp, uu, fe, k4)
        ok = True
        for i in range(n):
            xs[i] = xs[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not isfinite(xs[i]):
                ok = False
        if not ok:
            return xs, False
    return xs, True


def rhs(system, params, x, u, force):
    n = len(x)
    out = [0.0] * n
    _RHS[system]([float(v) for v in params], [float(v) for v in x], [float(v) for v in u],
                 [float(v) for v in force], out)
    return out
