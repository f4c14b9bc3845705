"""Correlated-Gaussian likelihood, priors and the unnormalized log-posterior."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy import linalg, special
from scipy.spatial.distance import cdist

LOG_2PI = math.log(2.0 * math.pi)


class InvalidCorrelationError(ValueError):
    """The correlation matrix built from a precision spec is not positive definite."""


# --------------------------------------------------------------------------
# data containers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Locations:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("locations must be a non-empty (n, m) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("locations must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class Dataset:
    y: np.ndarray
    locations: Locations

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        if y.size != self.locations.n:
            raise ValueError(f"{y.size} observations for {self.locations.n} locations")
        if not np.all(np.isfinite(y)):
            raise ValueError("observations must be finite")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size


# --------------------------------------------------------------------------
# precision structure
# --------------------------------------------------------------------------

CORRELATIONS: dict[str, Callable[[np.ndarray, float], np.ndarray]] = {
    "exponential": lambda d, ell: np.exp(-d / ell),
    "gaussian": lambda d, ell: np.exp(-((d / ell) ** 2)),
    "matern32": lambda d, ell: (1 + math.sqrt(3) * d / ell) * np.exp(-math.sqrt(3) * d / ell),
    "constant": lambda d, ell: np.ones_like(d),
}


@dataclass(frozen=True)
class PrecisionSpec:
    """Observation precision structure ``sigma^-2 A``.

    ``kind`` is ``"identity"`` or ``"isotropic"``; the isotropic case builds
    the correlation matrix ``A^-1 = rho(d(x_i, x_j))`` from a named (or
    callable) correlation function and a ``scipy.spatial.distance`` metric.
    """

    kind: str = "identity"
    correlation: str | Callable = "exponential"
    length_scale: float = 1.0
    metric: str = "euclidean"

    def __post_init__(self):
        if self.kind not in ("identity", "isotropic"):
            raise ValueError(f"unknown precision kind {self.kind!r}")
        if isinstance(self.correlation, str) and self.correlation not in CORRELATIONS:
            raise ValueError(f"unknown correlation {self.correlation!r}")
        if self.length_scale <= 0:
            raise ValueError("length_scale must be positive")

    @classmethod
    def from_dict(cls, d: dict | None) -> "PrecisionSpec":
        return cls(**(d or {}))

    def to_dict(self) -> dict:
        if callable(self.correlation):
            raise TypeError("callable correlations are not serializable")
        return {
            "kind": self.kind,
            "correlation": self.correlation,
            "length_scale": self.length_scale,
            "metric": self.metric,
        }


@dataclass(frozen=True)
class Precision:
    """A factored precision matrix; built once per problem."""

    A: np.ndarray
    b: np.ndarray
    log_det: float
    cho: tuple | None = field(default=None, repr=False)
    identity: bool = False

    @property
    def n(self) -> int:
        return self.b.size

    def quad(self, r: np.ndarray) -> float:
        if self.identity:
            return float(r @ r)
        return float(r @ (self.A @ r))


def _factor(A: np.ndarray, what: str):
    try:
        return linalg.cho_factor(A, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise InvalidCorrelationError(f"invalid correlation structure: {what} is not positive definite") from exc


def build_precision(spec: PrecisionSpec, locs: Locations) -> Precision:
    n = locs.n
    if spec.kind == "identity":
        eye = np.eye(n)
        return Precision(A=eye, b=np.ones(n), log_det=0.0, identity=True)

    rho = spec.correlation if callable(spec.correlation) else CORRELATIONS[spec.correlation]
    d = cdist(locs.points, locs.points, metric=spec.metric)
    corr = np.asarray(rho(d, spec.length_scale), dtype=float)
    if not np.allclose(corr, corr.T):
        raise InvalidCorrelationError("invalid correlation structure: matrix is not symmetric")
    c_fac = _factor(corr, "correlation matrix")
    A = linalg.cho_solve(c_fac, np.eye(n))
    A = 0.5 * (A + A.T)
    a_fac = _factor(A, "precision matrix")
    log_det = 2.0 * float(np.sum(np.log(np.diag(a_fac[0]))))
    b = np.sqrt(np.diag(corr))
    return Precision(A=A, b=b, log_det=log_det, cho=a_fac)


def _as_precision(A) -> Precision:
    if isinstance(A, Precision):
        return A
    A = np.asarray(A, dtype=float)
    fac = _factor(A, "A")
    log_det = 2.0 * float(np.sum(np.log(np.diag(fac[0]))))
    b = np.sqrt(np.diag(linalg.cho_solve(fac, np.eye(A.shape[0]))))
    return Precision(A=A, b=b, log_det=log_det, cho=fac)


def log_likelihood(y, f_vals, sigma: float, A) -> float:
    """Log density of ``N_n(f, (sigma^-2 A)^-1)`` at ``y``.

    ``A`` may be a raw matrix (factored on the fly) or a :class:`Precision`.
    """
    y = y.y if isinstance(y, Dataset) else np.asarray(y, dtype=float)
    f_vals = np.asarray(f_vals, dtype=float)
    prec = _as_precision(A)
    if y.shape != f_vals.shape or y.size != prec.n:
        raise ValueError(f"dimension mismatch: y {y.shape}, f {f_vals.shape}, A {prec.n}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    n = y.size
    r = y - f_vals
    return -0.5 * n * (LOG_2PI + 2.0 * math.log(sigma)) + 0.5 * prec.log_det - 0.5 * prec.quad(r) / sigma**2


# --------------------------------------------------------------------------
# priors
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("uniform prior needs hi > lo")

    @property
    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def logpdf(self, x: float) -> float:
        if self.lo < x < self.hi:
            return -math.log(self.hi - self.lo)
        return -math.inf

    def ppf(self, q):
        return self.lo + np.asarray(q) * (self.hi - self.lo)

    def to_dict(self) -> dict:
        return {"dist": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Gamma:
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("gamma prior needs positive shape and rate")

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def logpdf(self, x: float) -> float:
        if not x > 0:
            return -math.inf
        a, b = self.shape, self.rate
        return a * math.log(b) - math.lgamma(a) + (a - 1) * math.log(x) - b * x

    def ppf(self, q):
        return special.gammaincinv(self.shape, np.asarray(q)) / self.rate

    def to_dict(self) -> dict:
        return {"dist": "gamma", "shape": self.shape, "rate": self.rate}


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError("normal prior needs sd > 0")

    @property
    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def logpdf(self, x: float) -> float:
        z = (x - self.mean) / self.sd
        return -0.5 * (LOG_2PI + z * z) - math.log(self.sd)

    def ppf(self, q):
        return self.mean + self.sd * special.ndtri(np.asarray(q))

    def to_dict(self) -> dict:
        return {"dist": "normal", "mean": self.mean, "sd": self.sd}


Prior = Uniform | Gamma | Normal

_PRIORS = {"uniform": Uniform, "gamma": Gamma, "normal": Normal}


def prior_from_dict(d: dict) -> Prior:
    d = dict(d)
    kind = d.pop("dist")
    return _PRIORS[kind](**d)


@dataclass(frozen=True)
class PriorSpec:
    """Independent per-parameter priors for theta."""

    names: tuple[str, ...]
    dists: tuple[Prior, ...]

    def __post_init__(self):
        if len(self.names) != len(self.dists):
            raise ValueError("one prior per parameter name")

    @property
    def dim(self) -> int:
        return len(self.dists)

    @property
    def bounds(self) -> list[tuple[float, float]]:
        return [p.support for p in self.dists]

    def logpdf(self, theta: Sequence[float]) -> float:
        total = 0.0
        for p, x in zip(self.dists, theta):
            total += p.logpdf(float(x))
            if total == -math.inf:
                break
        return total

    @classmethod
    def from_dict(cls, d: dict) -> "PriorSpec":
        names = tuple(d)
        return cls(names, tuple(prior_from_dict(d[k]) for k in names))

    def to_dict(self) -> dict:
        return {k: p.to_dict() for k, p in zip(self.names, self.dists)}


@dataclass(frozen=True)
class NoiseModel:
    """Observation noise scale: a fixed sigma or a prior density on sigma."""

    sigma: float | None = None
    sigma_prior: Prior | None = None

    def __post_init__(self):
        if (self.sigma is None) == (self.sigma_prior is None):
            raise ValueError("set exactly one of sigma and sigma_prior")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def fixed(self) -> bool:
        return self.sigma is not None


# --------------------------------------------------------------------------
# posterior
# --------------------------------------------------------------------------


class ForwardEvaluator(Protocol):
    """Numerical forward map at the observation locations.

    Calling it with ``(theta, tolerance)`` returns a solver result exposing
    ``values``, ``K0_hat``, ``n_refinements`` and ``tolerance_met``.
    """

    order: int

    def __call__(self, theta: np.ndarray, tolerance: float): ...


@dataclass(frozen=True)
class PosteriorProblem:
    data: Dataset
    precision: Precision
    noise: NoiseModel
    prior: PriorSpec
    forward: ForwardEvaluator

    def __post_init__(self):
        if not self.noise.fixed:
            raise ValueError("sampling sigma is not supported; fix sigma in the noise model")
        if self.precision.n != self.data.n:
            raise ValueError("precision size does not match data")

    @property
    def sigma(self) -> float:
        return self.noise.sigma

    @property
    def bounds(self) -> list[tuple[float, float]]:
        return self.prior.bounds

    def log_posterior(self, theta, tolerance: float):
        return log_posterior(self, theta, tolerance)


def log_posterior(problem: PosteriorProblem, theta, tolerance: float):
    """Unnormalized log-posterior through the numerical forward map.

    Returns ``(value, solver_result)``. Outside the prior support the value
    is ``-inf`` and the solver is not run (``solver_result`` is ``None``).
    """
    theta = np.asarray(theta, dtype=float)
    lp = problem.prior.logpdf(theta)
    if lp == -math.inf:
        return -math.inf, None
    res = problem.forward(theta, tolerance)
    ll = log_likelihood(problem.data.y, res.values, problem.sigma, problem.precision)
    return ll + lp, res
