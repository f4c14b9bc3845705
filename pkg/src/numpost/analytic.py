"""Closed-form forward maps used as ground truth.

Logistic growth and the Cole-Hopf solution of the viscous Burgers Riemann
problem, plus the complementary error function helpers the latter needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class LogisticParams:
    r: float
    K: float
    X0: float

    def __post_init__(self):
        if not (self.r > 0 and self.K > 0 and self.X0 > 0):
            raise ValueError(f"logistic parameters must be positive, got {self}")


@dataclass(frozen=True)
class BurgersParams:
    u_L: float
    u_R: float
    z0: float
    epsilon: float

    def __post_init__(self):
        if not self.u_L > self.u_R:
            raise ValueError("shock regime requires u_L > u_R")
        if not self.epsilon > 0:
            raise ValueError("viscosity must be positive")

    @property
    def jump(self) -> float:
        return self.u_L - self.u_R

    @property
    def speed(self) -> float:
        return 0.5 * (self.u_L + self.u_R)

    def initial(self, z):
        """Step initial condition; the midpoint value exactly at z0."""
        z = np.asarray(z, dtype=float)
        return np.where(z < self.z0, self.u_L, np.where(z > self.z0, self.u_R, self.speed))


def logistic_exact(t, params: LogisticParams):
    t = np.asarray(t, dtype=float)
    r, K, X0 = params.r, params.K, params.X0
    # exp(-r t) <= 1 for t >= 0, so nothing here can overflow
    return K * X0 / (X0 + (K - X0) * np.exp(-r * t))


def logistic_rhs(params: LogisticParams):
    r, K = params.r, params.K

    def rhs(t, x):
        return r * x * (1.0 - x / K)

    return rhs


def erfc(x):
    """Complementary error function (scipy's Cephes implementation)."""
    return special.erfc(x)


def erfcx(x):
    """Scaled complementary error function exp(x**2) * erfc(x)."""
    return special.erfcx(x)


def log_erfc(x):
    """log(erfc(x)) without underflow for large positive x."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x > 0
    out[pos] = np.log(special.erfcx(x[pos])) - x[pos] ** 2
    out[~pos] = np.log(special.erfc(x[~pos]))
    return out


def burgers_exact(z, t, params: BurgersParams):
    """Cole-Hopf solution of the viscous Burgers Riemann problem.

    The solution is written as ``u_L - jump / (1 + exp(L))`` with::

        L = log erfc((zeta - u_L t) / s) - log erfc((u_R t - zeta) / s)
            - jump / (2 eps) * (zeta - c t)

    where ``zeta = z - z0``, ``s = sqrt(4 eps t)`` and ``c`` is the shock
    speed. Assembling ``L`` in log space keeps sharp profiles (large
    ``jump / eps``) free of overflow and 0/0.
    """
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    z, t = np.broadcast_arrays(z, t)
    out = np.empty(z.shape)

    at0 = t <= 0
    if np.any(at0):
        out[at0] = params.initial(z[at0])
    live = ~at0
    if np.any(live):
        zl, tl = z[live], t[live]
        eps, jump = params.epsilon, params.jump
        zeta = zl - params.z0
        s = np.sqrt(4.0 * eps * tl)
        L = (
            log_erfc((zeta - params.u_L * tl) / s)
            - log_erfc((params.u_R * tl - zeta) / s)
            - jump / (2.0 * eps) * (zeta - params.speed * tl)
        )
        out[live] = params.u_L - jump * special.expit(-L)
    return out if out.ndim else float(out)
