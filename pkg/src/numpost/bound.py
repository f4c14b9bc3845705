"""Admissible forward-map error from the expected absolute Bayes factor.

For a target expected ABF ``e`` the uniform absolute solver error that may
be tolerated at the observation locations is::

    K0 = e * sqrt(2 pi) * sigma_star / (n * factor)

where ``factor = max_i b_i * (1/n) * sum_ij |a_ij|`` captures the
correlation structure (exactly 1 for independent observations).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from .model import Gamma, NoiseModel, Normal, Precision, Prior, Uniform

DEFAULT_TARGET = 0.05
JEFFREYS_BARE_MENTION = 1.0
ROUNDED_K = 0.12  # the printed, rounded value of sqrt(2 pi) / 20


class DivergentIntegralError(ValueError):
    """E[1/sigma] is infinite under the given noise prior."""


@dataclass(frozen=True)
class ToleranceReport:
    n: int
    sigma_star: float
    correlation_factor: float
    target_eabf: float
    K0_admissible: float
    k_constant: float

    def to_dict(self) -> dict:
        return asdict(self)


def _inverse_moment_diverges(prior: Prior) -> bool:
    # integrability of g(s)/s at 0 needs g(s) -> 0 faster than a constant
    if isinstance(prior, Gamma):
        return prior.shape <= 1.0
    if isinstance(prior, Uniform):
        return prior.lo <= 0.0
    if isinstance(prior, Normal):
        return math.exp(prior.logpdf(0.0)) > 0.0
    raise TypeError(f"unsupported noise prior {prior!r}")


def _positive_mass(prior: Prior) -> float:
    if isinstance(prior, Normal):
        return float(0.5 * math.erfc(-prior.mean / (prior.sd * math.sqrt(2.0))))
    return 1.0


def sigma_star(noise: NoiseModel) -> float:
    """Harmonic-type summary ``(int g(s)/s ds)^-1`` of the noise prior.

    A fixed sigma is returned unchanged. Otherwise the integral is computed
    by adaptive quadrature (relative error 1e-8) over the positive
    half-line, split at prior quantiles so narrow priors are resolved. A
    normal prior is truncated to ``(0, inf)``.
    """
    if noise.fixed:
        return float(noise.sigma)
    prior = noise.sigma_prior
    lo, hi = prior.support
    lo = max(lo, 0.0)
    if _inverse_moment_diverges(prior):
        raise DivergentIntegralError(f"E[1/sigma] diverges for {prior!r}")

    qs = [1e-12, 1e-6, 1e-3, 0.1, 0.5, 0.9, 0.999, 1 - 1e-6, 1 - 1e-12]
    cuts = np.asarray(prior.ppf(qs), dtype=float)
    knots = sorted({lo, hi, *[c for c in cuts if lo < c < hi and np.isfinite(c)]})

    def integrand(s):
        return math.exp(prior.logpdf(s)) / s

    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        val, _ = integrate.quad(integrand, a, b, epsrel=1e-10, epsabs=0.0, limit=200)
        total += val
    total /= _positive_mass(prior)
    if not (np.isfinite(total) and total > 0):
        raise DivergentIntegralError(f"E[1/sigma] is not finite for {prior!r}")
    return 1.0 / total


def correlation_factor(A, b=None) -> float:
    """``max_i b_i * (1/n) * sum_ij |a_ij|``.

    ``b_i`` is taken at its maximum so the bound stays valid whichever
    index it is attached to.
    """
    if isinstance(A, Precision):
        A, b = A.A, A.b
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = b.size
    if A.shape != (n, n):
        raise ValueError(f"A has shape {A.shape}, expected ({n}, {n})")
    return float(np.max(b) * np.abs(A).sum() / n)


def k_constant(target_eabf: float = DEFAULT_TARGET) -> float:
    return target_eabf * math.sqrt(2.0 * math.pi)


def admissible_K0(
    n: int,
    sigma_star: float,
    factor: float = 1.0,
    target_eabf: float = DEFAULT_TARGET,
    k: float | None = None,
) -> ToleranceReport:
    """Largest uniform solver error keeping the EABF bound at ``target_eabf``.

    ``k`` overrides ``target_eabf * sqrt(2 pi)``; pass :data:`ROUNDED_K` to
    reproduce the rounded constant used in the printed examples.
    """
    if not (n > 0 and sigma_star > 0 and factor > 0):
        raise ValueError("n, sigma_star and factor must be positive")
    if not 0 < target_eabf:
        raise ValueError("target EABF must be positive")
    kc = k_constant(target_eabf) if k is None else float(k)
    K0 = kc * sigma_star / (n * factor)
    return ToleranceReport(
        n=int(n),
        sigma_star=float(sigma_star),
        correlation_factor=float(factor),
        target_eabf=float(target_eabf),
        K0_admissible=float(K0),
        k_constant=kc,
    )


def eabf_upper_bound(n: int, sigma_star: float, K0: float, factor: float = 1.0) -> float:
    return math.sqrt(1.0 / (2.0 * math.pi)) * (n / sigma_star) * K0 * factor
