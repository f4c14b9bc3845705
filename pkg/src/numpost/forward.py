"""Forward maps of the two experiments, as used inside the sampler.

Each evaluator is called with ``(theta, tolerance)`` and returns an object
with ``values`` at the observation locations, the error estimate
``K0_hat``, ``n_refinements`` and ``tolerance_met``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import BurgersParams, LogisticParams, burgers_exact, logistic_exact, logistic_rhs
from .burgers import CFL, Grid1D, adaptive_grid_solve, solve_burgers
from .ode import adaptive_solve, integrate_fixed


@dataclass
class ExactResult:
    values: np.ndarray
    K0_hat: float = 0.0
    n_refinements: int = 0
    tolerance_met: bool = True


class LogisticForward:
    """Cash-Karp solution of the logistic equation, ``theta = (r, K)``.

    With ``h_fixed`` set the step never changes (the reference run);
    otherwise steps are halved from ``h_init`` until the estimated global
    error meets the tolerance.
    """

    order = 5

    def __init__(self, times, X0: float, h_fixed: float | None = None, h_init: float = 0.1, max_halvings: int = 20):
        self.times = np.asarray(times, dtype=float)
        self.X0 = float(X0)
        self.h_fixed = h_fixed
        self.h_init = h_init
        self.max_halvings = max_halvings
        self.t_span = (0.0, float(self.times.max()))

    def __call__(self, theta, tolerance: float):
        p = LogisticParams(float(theta[0]), float(theta[1]), self.X0)
        rhs = logistic_rhs(p)
        if self.h_fixed is not None:
            res = integrate_fixed(rhs, self.X0, *self.t_span, self.h_fixed, self.times)
            res.tolerance_met = res.K0_hat <= tolerance
            return res
        return adaptive_solve(
            rhs, self.X0, self.t_span, self.times, tolerance, h_init=self.h_init, max_halvings=self.max_halvings
        )


class ExactLogisticForward:
    """Closed-form logistic curve; for data generation and sanity checks."""

    order = math.inf

    def __init__(self, times, X0: float):
        self.times = np.asarray(times, dtype=float)
        self.X0 = float(X0)

    def __call__(self, theta, tolerance: float = math.inf):
        p = LogisticParams(float(theta[0]), float(theta[1]), self.X0)
        return ExactResult(np.asarray(logistic_exact(self.times, p), dtype=float))


def burgers_params(theta, u_L: float, epsilon: float) -> BurgersParams:
    """``theta = (u_L - u_R, z0)`` with the left state held at ``u_L``."""
    return BurgersParams(u_L=u_L, u_R=u_L - float(theta[0]), z0=float(theta[1]), epsilon=epsilon)


class BurgersForward:
    """Finite-volume value ``u(z1, t_j)``, ``theta = (u_L - u_R, z0)``.

    With ``N_fixed`` the grid never changes; otherwise the grid is doubled
    from ``N_start`` up to ``N_max`` until ``K0 dz^2`` meets the tolerance,
    with ``K0`` from an offline calibration.
    """

    order = 2

    def __init__(
        self,
        times,
        z1: float,
        u_L: float,
        epsilon: float,
        N_fixed: int | None = None,
        N_start: int = 128,
        N_max: int = 512,
        K0: float | None = None,
        cfl: float = CFL,
    ):
        if N_fixed is None and K0 is None:
            raise ValueError("the adaptive grid needs a calibrated K0")
        self.times = np.asarray(times, dtype=float)
        self.z1 = float(z1)
        self.u_L = float(u_L)
        self.epsilon = float(epsilon)
        self.N_fixed = N_fixed
        self.N_start = N_start
        self.N_max = N_max
        self.K0 = K0
        self.cfl = cfl

    def __call__(self, theta, tolerance: float):
        p = burgers_params(theta, self.u_L, self.epsilon)
        if self.N_fixed is not None:
            g = Grid1D(int(self.N_fixed))
            res = solve_burgers(p, g, self.z1, self.times, c=self.cfl)
            if self.K0 is not None:
                res.K0_hat = self.K0 * g.dz**2
                res.tolerance_met = res.K0_hat <= tolerance
            return res
        return adaptive_grid_solve(p, self.z1, self.times, tolerance, self.K0, N_start=self.N_start, N_max=self.N_max)


class ExactBurgersForward:
    order = math.inf

    def __init__(self, times, z1: float, u_L: float, epsilon: float):
        self.times = np.asarray(times, dtype=float)
        self.z1 = float(z1)
        self.u_L = float(u_L)
        self.epsilon = float(epsilon)

    def __call__(self, theta, tolerance: float = math.inf):
        p = burgers_params(theta, self.u_L, self.epsilon)
        return ExactResult(np.asarray(burgers_exact(self.z1, self.times, p), dtype=float))
