"""Compiled inner loop of the Burgers solver.

Mirrors ``burgers.fv_step`` (which stays the readable numpy reference) and
is cross-checked against it in the test suite.
"""

import numpy as np
from numba import njit

# Largest Crank-Nicolson half-step number 0.25*dt*eps/dz^2 accepted. The
# mirrored-ghost diffusion matrix has a constant null vector, so its
# condition number grows like this number and the tridiagonal pivots lose
# all precision well before 1/machine-epsilon.
MAX_DIFFUSION_NUMBER = 1e8


@njit(cache=True)
def _rate(u, dz, g, half, flux, out):
    N = u.shape[0]
    for i in range(N):
        g[i + 2] = u[i]
    g[1] = u[0]
    g[0] = u[1]
    g[N + 2] = u[N - 1]
    g[N + 3] = u[N - 2]
    for k in range(1, N + 3):
        dl = g[k] - g[k - 1]
        dr = g[k + 1] - g[k]
        if dl * dr > 0.0:
            half[k] = 0.5 * (dl if abs(dl) < abs(dr) else dr)
        else:
            half[k] = 0.0
    for k in range(1, N + 2):
        ul = g[k] + half[k]
        ur = g[k + 1] - half[k + 1]
        alpha = max(abs(ul), abs(ur))
        flux[k] = 0.25 * (ul * ul + ur * ur) - 0.5 * alpha * (ur - ul)
    for i in range(N):
        out[i] = (flux[i + 1] - flux[i + 2]) / dz


@njit(cache=True)
def _cn(u, a, cp, rhs, out):
    # Thomas algorithm for (I - aL) x = (I + aL) u, Neumann closure
    N = u.shape[0]
    rhs[0] = u[0] + a * (u[1] - u[0])
    for i in range(1, N - 1):
        rhs[i] = u[i] + a * (u[i + 1] - 2.0 * u[i] + u[i - 1])
    rhs[N - 1] = u[N - 1] + a * (u[N - 2] - u[N - 1])
    diag = 1.0 + a
    cp[0] = -a / diag
    rhs[0] = rhs[0] / diag
    for i in range(1, N):
        diag = (1.0 + a if i == N - 1 else 1.0 + 2.0 * a) + a * cp[i - 1]
        cp[i] = -a / diag
        rhs[i] = (rhs[i] + a * rhs[i - 1]) / diag
    out[N - 1] = rhs[N - 1]
    for i in range(N - 2, -1, -1):
        out[i] = rhs[i] - cp[i] * out[i + 1]


@njit(cache=True)
def step(u, dz, dt, eps):
    N = u.shape[0]
    g = np.empty(N + 4)
    half = np.zeros(N + 4)
    flux = np.empty(N + 3)
    r = np.empty(N)
    cp = np.empty(N)
    rhs = np.empty(N)
    v = np.empty(N)
    w = np.empty(N)
    a = 0.25 * dt * eps / (dz * dz)
    if a > MAX_DIFFUSION_NUMBER:
        raise ValueError("time step too large for the implicit diffusion solve")
    _cn(u, a, cp, rhs, v)
    _rate(v, dz, g, half, flux, r)
    for i in range(N):
        w[i] = v[i] + dt * r[i]
    _rate(w, dz, g, half, flux, r)
    for i in range(N):
        w[i] = 0.5 * (v[i] + w[i] + dt * r[i])
    _cn(w, a, cp, rhs, v)
    return v


@njit(cache=True)
def march(u, dz, eps, c, t, stop):
    """Advance from ``t`` to exactly ``stop``; returns (u, steps, ok)."""
    steps = 0
    while t < stop:
        umax = 0.0
        for x in u:
            if abs(x) > umax:
                umax = abs(x)
        if umax == 0.0:
            return u, steps, False
        dt = c * dz / umax
        if eps > 0.0:
            dt = min(dt, 4.0 * MAX_DIFFUSION_NUMBER * dz * dz / eps)
        if t + dt >= stop:
            dt = stop - t
            t_new = stop
        else:
            t_new = t + dt
        u = step(u, dz, dt, eps)
        for x in u:
            if not np.isfinite(x):
                return u, steps, False
        t = t_new
        steps += 1
    return u, steps, True
