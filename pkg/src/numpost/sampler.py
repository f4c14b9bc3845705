"""Adaptive random-walk Metropolis, trace diagnostics and MAP extraction.

Bounded parameters are sampled in an unconstrained space (logit for
two-sided bounds, log for one-sided) with the Jacobian included in the
acceptance ratio. Proposals are joint Gaussian moves with one scale per
component. During burn-in the scales are tuned: per-component shape from
the running standard deviation of the chain, overall size by a
Robbins-Monro recursion toward the target acceptance rate. After the
adaptation cutoff they are frozen, so the post-burn-in chain is a
time-homogeneous Metropolis chain.

Random numbers come from ``numpy.random.Generator(PCG64(seed))``; normal
variates use numpy's ziggurat method.
"""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, log_expit


class DegenerateTraceWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# unconstrained parametrization
# --------------------------------------------------------------------------


class _Transform:
    def __init__(self, bounds):
        self.bounds = [(float(lo), float(hi)) for lo, hi in bounds]

    def to_theta(self, y):
        x = np.empty_like(y)
        for j, (lo, hi) in enumerate(self.bounds):
            if math.isfinite(lo) and math.isfinite(hi):
                x[j] = lo + (hi - lo) * expit(y[j])
            elif math.isfinite(lo):
                x[j] = lo + math.exp(y[j])
            elif math.isfinite(hi):
                x[j] = hi - math.exp(y[j])
            else:
                x[j] = y[j]
        return x

    def to_free(self, x):
        y = np.empty(len(x))
        for j, (lo, hi) in enumerate(self.bounds):
            if math.isfinite(lo) and math.isfinite(hi):
                p = (x[j] - lo) / (hi - lo)
                y[j] = math.log(p) - math.log1p(-p)
            elif math.isfinite(lo):
                y[j] = math.log(x[j] - lo)
            elif math.isfinite(hi):
                y[j] = math.log(hi - x[j])
            else:
                y[j] = x[j]
        return y

    def log_jacobian(self, y) -> float:
        total = 0.0
        for j, (lo, hi) in enumerate(self.bounds):
            if math.isfinite(lo) and math.isfinite(hi):
                total += math.log(hi - lo) + float(log_expit(y[j]) + log_expit(-y[j]))
            elif math.isfinite(lo) or math.isfinite(hi):
                total += y[j]
        return total

    def dtheta_dfree(self, y) -> np.ndarray:
        return np.exp([self.log_jacobian_1(j, y[j]) for j in range(len(y))])

    def log_jacobian_1(self, j, yj) -> float:
        lo, hi = self.bounds[j]
        if math.isfinite(lo) and math.isfinite(hi):
            return math.log(hi - lo) + float(log_expit(yj) + log_expit(-yj))
        if math.isfinite(lo) or math.isfinite(hi):
            return yj
        return 0.0


# --------------------------------------------------------------------------
# config and trace
# --------------------------------------------------------------------------


@dataclass
class SamplerConfig:
    """Chain settings.

    ``scales`` are initial proposal standard deviations in parameter units
    (converted to the unconstrained space at the initial point); by default
    1% of ``|initial|`` or 0.01. ``burn_in`` defaults to 20% of the
    iterations and ``adapt_until`` to ``burn_in``.
    """

    iterations: int
    initial: Sequence[float]
    seed: int = 0
    burn_in: int | None = None
    scales: Sequence[float] | None = None
    adapt_window: int = 100
    target_accept: float = 0.234
    adapt_until: int | None = None

    def __post_init__(self):
        if self.burn_in is None:
            self.burn_in = int(0.2 * self.iterations)
        if self.adapt_until is None:
            self.adapt_until = self.burn_in
        if not self.iterations >= self.burn_in >= 0:
            raise ValueError("need iterations >= burn_in >= 0")
        if self.adapt_until > self.burn_in:
            raise ValueError("adaptation must stop by the end of burn-in")
        if self.scales is not None and not all(s > 0 for s in self.scales):
            raise ValueError("proposal scales must be positive")
        if not 0 < self.target_accept < 1:
            raise ValueError("target acceptance must be in (0, 1)")


@dataclass
class SolverStats:
    solves: int = 0
    refinements: int = 0
    unmet: int = 0

    def record(self, info) -> None:
        if info is None:
            return
        self.solves += 1
        self.refinements += int(getattr(info, "n_refinements", 0))
        if not getattr(info, "tolerance_met", True):
            self.unmet += 1

    @property
    def unmet_rate(self) -> float:
        return self.unmet / self.solves if self.solves else 0.0

    def to_dict(self) -> dict:
        return {"solves": self.solves, "refinements": self.refinements, "unmet": self.unmet, "unmet_rate": self.unmet_rate}


@dataclass
class Trace:
    """Post-burn-in samples and run statistics.

    ``scales`` logs the proposal standard deviations (unconstrained space)
    used at every iteration, burn-in included.
    """

    samples: np.ndarray
    log_posts: np.ndarray
    acceptance_rate: float = math.nan
    wall_time: float = 0.0
    solver_stats: SolverStats = field(default_factory=SolverStats)
    names: tuple[str, ...] | None = None
    burn_in: int = 0
    burn_acceptance_rate: float = math.nan
    scales: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.log_posts = np.asarray(self.log_posts, dtype=float)
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2:
            samples = samples.reshape(self.log_posts.size, -1)
        if samples.shape[0] != self.log_posts.size:
            raise ValueError("one log-posterior value per sample")
        self.samples = samples
        if self.names is None:
            self.names = tuple(f"theta{j}" for j in range(self.samples.shape[1]))

    def __len__(self) -> int:
        return self.log_posts.size

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def summary(self) -> dict:
        out = {
            "n_samples": len(self),
            "burn_in": self.burn_in,
            "acceptance_rate": self.acceptance_rate,
            "burn_acceptance_rate": self.burn_acceptance_rate,
            "wall_time": self.wall_time,
            "solver_stats": self.solver_stats.to_dict(),
        }
        if len(self):
            out["mean"] = dict(zip(self.names, self.samples.mean(axis=0).tolist()))
            out["map"] = dict(zip(self.names, map_estimate(self).tolist()))
        if len(self) >= 100:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateTraceWarning)
                out["ess"] = {n: effective_sample_size(self, j) for j, n in enumerate(self.names)}
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", *self.names, "log_post"])
            for i, (x, lp) in enumerate(zip(self.samples, self.log_posts)):
                w.writerow([self.burn_in + i, *(repr(float(v)) for v in x), repr(float(lp))])

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)

    @classmethod
    def from_csv(cls, path) -> "Trace":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        data = np.array(body, dtype=float).reshape(len(body), len(header))
        burn = int(data[0, 0]) if len(body) else 0
        return cls(samples=data[:, 1:-1], log_posts=data[:, -1], names=tuple(header[1:-1]), burn_in=burn)


# --------------------------------------------------------------------------
# chain
# --------------------------------------------------------------------------


def _evaluate(logpost: Callable, theta, stats: SolverStats) -> float:
    out = logpost(theta)
    if isinstance(out, tuple):
        val, info = out
        stats.record(info)
    else:
        val = out
    return float(val)


def run_chain(logpost: Callable, config: SamplerConfig, bounds=None, names=None) -> Trace:
    """Run one adaptive random-walk Metropolis chain.

    ``logpost(theta)`` returns the log-posterior, or a ``(value, info)``
    pair whose ``info`` carries solver counters (``n_refinements``,
    ``tolerance_met``). ``bounds`` lists the support ``(lo, hi)`` of each
    parameter; omit for unbounded targets.
    """
    x0 = np.asarray(config.initial, dtype=float)
    d = x0.size
    tr = _Transform(bounds if bounds is not None else [(-math.inf, math.inf)] * d)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    stats = SolverStats()
    t_start = time.perf_counter()

    y = tr.to_free(x0)
    lp_x = _evaluate(logpost, tr.to_theta(y), stats)
    if not math.isfinite(lp_x):
        raise ValueError(f"log-posterior is not finite at the initial point {x0}")
    lp_y = lp_x + tr.log_jacobian(y)

    if config.scales is None:
        theta_scales = np.where(x0 != 0, 0.01 * np.abs(x0), 0.01)
    else:
        theta_scales = np.asarray(config.scales, dtype=float)
    base = theta_scales / tr.dtheta_dfree(y)
    log_lam = 0.0

    n_iter, burn = config.iterations, config.burn_in
    samples = np.empty((n_iter - burn, d))
    log_posts = np.empty(n_iter - burn)
    scale_log = np.empty((n_iter, d))
    acc_burn = acc_main = 0

    # Welford accumulators over the unconstrained chain
    w_n, w_mean, w_m2 = 0, np.zeros(d), np.zeros(d)

    for it in range(n_iter):
        scale = math.exp(log_lam) * base
        scale_log[it] = scale
        y_new = y + scale * rng.standard_normal(d)
        x_new = tr.to_theta(y_new)
        lp_new_x = _evaluate(logpost, x_new, stats)
        u = rng.random()
        if math.isfinite(lp_new_x):
            lp_new_y = lp_new_x + tr.log_jacobian(y_new)
            log_alpha = lp_new_y - lp_y
        else:
            log_alpha = -math.inf
        accept = math.log(u) < log_alpha if log_alpha < 0 else True
        if accept:
            y, lp_y, lp_x = y_new, lp_new_y, lp_new_x

        if it < config.adapt_until:
            w_n += 1
            delta = y - w_mean
            w_mean += delta / w_n
            w_m2 += delta * (y - w_mean)
            alpha = math.exp(min(0.0, log_alpha))
            log_lam += (alpha - config.target_accept) / (it + 1) ** 0.6
            if (it + 1) % config.adapt_window == 0 and w_n >= 2 * config.adapt_window:
                sd = np.sqrt(w_m2 / (w_n - 1))
                if np.all(sd > 0):
                    # reshape without changing the overall size, which stays
                    # under control of the acceptance-rate recursion
                    log_lam += float(np.mean(np.log(base)) - np.mean(np.log(sd)))
                    base = sd

        if it < burn:
            acc_burn += accept
        else:
            acc_main += accept
            samples[it - burn] = tr.to_theta(y)
            log_posts[it - burn] = lp_x

    n_main = n_iter - burn
    return Trace(
        samples=samples,
        log_posts=log_posts,
        acceptance_rate=acc_main / n_main if n_main else math.nan,
        wall_time=time.perf_counter() - t_start,
        solver_stats=stats,
        names=tuple(names) if names is not None else None,
        burn_in=burn,
        burn_acceptance_rate=acc_burn / burn if burn else math.nan,
        scales=scale_log,
    )


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------


def map_estimate(trace: Trace) -> np.ndarray:
    """Sample with the largest recorded log-posterior."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    return trace.samples[int(np.argmax(trace.log_posts))].copy()


def _autocorr(x: np.ndarray) -> np.ndarray:
    n = x.size
    x = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n]
    return acov / acov[0]


def effective_sample_size(trace, component: int = 0) -> float:
    """Geyer initial-positive-sequence ESS of one component.

    Accepts a :class:`Trace` or a 1-d array. A constant trace triggers a
    :class:`DegenerateTraceWarning` and returns 1.0.
    """
    x = trace.samples[:, component] if isinstance(trace, Trace) else np.asarray(trace, dtype=float)
    n = x.size
    if n < 100:
        raise ValueError(f"need at least 100 samples for ESS, got {n}")
    if np.ptp(x) == 0:
        warnings.warn("constant trace; ESS is meaningless", DegenerateTraceWarning, stacklevel=2)
        return 1.0
    rho = _autocorr(x)
    tau = -1.0
    for m in range(n // 2):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    # an anticorrelated chain can drive the estimate of tau below 1/n
    return float(n / tau) if tau > 1.0 else float(n)
