"""Cash-Karp embedded Runge-Kutta with global error estimation.

The global error at each node is estimated by summing the per-step local
error estimates ``h * sum((b_i - bhat_i) K_i)`` of the embedded pair; the
maximum absolute running sum is the estimate ``K0_hat`` of the uniform
forward-map error. :func:`adaptive_solve` halves the step size and
re-integrates from the start until ``K0_hat`` is within tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction as Fr
from typing import Callable

import numpy as np


class IntegrationError(RuntimeError):
    def __init__(self, t: float, h: float, msg: str = "non-finite stage value"):
        super().__init__(f"{msg} at t={t!r}, h={h!r}")
        self.t = t
        self.h = h


@dataclass(frozen=True)
class ButcherTableau:
    a: tuple[tuple[Fr, ...], ...]
    b: tuple[Fr, ...]
    b_hat: tuple[Fr, ...]
    c: tuple[Fr, ...]
    order: int

    @property
    def stages(self) -> int:
        return len(self.c)


CASH_KARP = ButcherTableau(
    a=(
        (),
        (Fr(1, 5),),
        (Fr(3, 40), Fr(9, 40)),
        (Fr(3, 10), Fr(-9, 10), Fr(6, 5)),
        (Fr(-11, 54), Fr(5, 2), Fr(-70, 27), Fr(35, 27)),
        (Fr(1631, 55296), Fr(175, 512), Fr(575, 13824), Fr(44275, 110592), Fr(253, 4096)),
    ),
    b=(Fr(37, 378), Fr(0), Fr(250, 621), Fr(125, 594), Fr(0), Fr(512, 1771)),
    b_hat=(Fr(2825, 27648), Fr(0), Fr(18575, 48384), Fr(13525, 55296), Fr(277, 14336), Fr(1, 4)),
    c=(Fr(0), Fr(1, 5), Fr(3, 10), Fr(3, 5), Fr(1), Fr(7, 8)),
    order=5,
)

# float coefficients with structural zeros dropped
_A = [[(j, float(a)) for j, a in enumerate(row) if a] for row in CASH_KARP.a]
_C = [float(c) for c in CASH_KARP.c]
_B = [(i, float(b)) for i, b in enumerate(CASH_KARP.b) if b]
_BHAT = [(i, float(b)) for i, b in enumerate(CASH_KARP.b_hat) if b]
_E = [(i, float(b - bh)) for i, (b, bh) in enumerate(zip(CASH_KARP.b, CASH_KARP.b_hat)) if b != bh]


def _finite(x) -> bool:
    if isinstance(x, float):
        return math.isfinite(x)
    return bool(np.all(np.isfinite(x)))


def _stages(rhs, t, u, h):
    K = []
    for i, row in enumerate(_A):
        ui = u
        for j, a in row:
            ui = ui + (h * a) * K[j]
        k = rhs(t + _C[i] * h, ui)
        if not _finite(k):
            raise IntegrationError(t, h)
        K.append(k)
    return K


def ck45_step(rhs: Callable, t: float, u, h: float):
    """One Cash-Karp step.

    Returns ``(u5, u4, K)``: the fifth- and fourth-order updates and the six
    stage derivatives. ``u`` may be a float or a numpy array.
    """
    K = _stages(rhs, t, u, h)
    u5 = u
    for i, b in _B:
        u5 = u5 + (h * b) * K[i]
    u4 = u
    for i, b in _BHAT:
        u4 = u4 + (h * b) * K[i]
    return u5, u4, K


@dataclass
class SolverResult:
    """Forward-map values at the observation times plus error bookkeeping.

    ``K0_hat`` is the largest absolute estimated global error over all grid
    nodes. ``grid``, ``path`` and ``err_path`` hold the full trajectory of
    the observed component and its estimated global error.
    """

    values: np.ndarray
    K0_hat: float
    h_used: float
    n_halvings: int = 0
    tolerance_met: bool = True
    grid: np.ndarray = field(default=None, repr=False)
    path: np.ndarray = field(default=None, repr=False)
    err_path: np.ndarray = field(default=None, repr=False)

    @property
    def n_refinements(self) -> int:
        return self.n_halvings

    @property
    def discretization(self) -> float:
        return self.h_used


def _time_nodes(t0: float, t_end: float, h: float, breaks: np.ndarray) -> np.ndarray:
    """Uniform grid ``t0 + k h`` merged with the break points.

    Grid nodes within round-off of a break point are replaced by it, so the
    break points are hit bit-exactly and no sliver steps appear.
    """
    m = int(math.floor((t_end - t0) / h + 1e-9))
    nodes = t0 + h * np.arange(m + 1)
    near = np.abs(nodes[:, None] - breaks[None, :]).min(axis=1) <= 1e-9 * h
    nodes = nodes[~near]
    return np.unique(np.concatenate([nodes, breaks, [t0]]))


def integrate_fixed(
    rhs: Callable,
    u0,
    t0: float,
    t_end: float,
    h: float,
    obs_times,
    observe: int | None = None,
) -> SolverResult:
    """Integrate on a uniform grid, hitting every observation time exactly.

    ``observe`` picks the state component reported (``None`` for scalar
    problems). Steps are only ever shortened, never lengthened, to land on
    observation times and ``t_end``.
    """
    if not h > 0:
        raise ValueError("step size must be positive")
    obs = np.asarray(obs_times, dtype=float)
    if obs.size and (obs.min() < t0 or obs.max() > t_end):
        raise ValueError("observation times must lie in [t0, t_end]")
    nodes = _time_nodes(t0, t_end, h, np.unique(np.append(obs, t_end)))

    scalar = np.ndim(u0) == 0
    u = float(u0) if scalar else np.array(u0, dtype=float)

    def pick(x):
        return x if observe is None else x[observe]

    n = nodes.size
    path = np.empty(n)
    err_path = np.empty(n)
    path[0] = pick(u)
    err = 0.0 if scalar else np.zeros_like(u)
    err_path[0] = 0.0
    comp = 0.0  # Kahan compensation for the state update
    tl = nodes.tolist()
    for k in range(n - 1):
        t = tl[k]
        dt = tl[k + 1] - t
        K = _stages(rhs, t, u, dt)
        du = 0.0
        for i, b in _B:
            du = du + (dt * b) * K[i]
        tau = 0.0
        for i, e in _E:
            tau = tau + (dt * e) * K[i]
        du = du - comp
        u_next = u + du
        comp = (u_next - u) - du
        u = u_next
        err = err + tau
        path[k + 1] = pick(u)
        err_path[k + 1] = pick(err)

    idx = np.searchsorted(nodes, obs)
    return SolverResult(
        values=path[idx],
        K0_hat=float(np.max(np.abs(err_path))),
        h_used=float(h),
        grid=nodes,
        path=path,
        err_path=err_path,
    )


def adaptive_solve(
    rhs: Callable,
    u0,
    t_span: tuple[float, float],
    obs_times,
    tolerance: float,
    h_init: float = 0.1,
    max_halvings: int = 20,
    observe: int | None = None,
) -> SolverResult:
    """Halve the step from ``h_init`` until ``K0_hat <= tolerance``.

    Each attempt is a full re-solve from ``t_span[0]``. Running out of
    halvings yields the last result flagged ``tolerance_met=False``.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    t0, t_end = t_span
    for k in range(max_halvings + 1):
        res = integrate_fixed(rhs, u0, t0, t_end, h_init / 2**k, obs_times, observe=observe)
        res.n_halvings = k
        if res.K0_hat <= tolerance:
            res.tolerance_met = True
            return res
    res.tolerance_met = False
    return res
