"""Synthetic data, fine versus adaptive posterior runs, and their comparison.

A run samples the same posterior twice, by default with the same chain seed: once
through a fixed fine discretization and once through the error-controlled
adaptive solver whose tolerance comes from :mod:`numpost.bound`. The two
traces are then compared marginal by marginal.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import constants
from .bound import ToleranceReport, admissible_K0, correlation_factor, sigma_star
from .burgers import calibrate_observation_K0
from .forward import (
    BurgersForward,
    ExactBurgersForward,
    ExactLogisticForward,
    LogisticForward,
    burgers_params,
)
from .model import (
    Dataset,
    Locations,
    NoiseModel,
    PosteriorProblem,
    PrecisionSpec,
    PriorSpec,
    build_precision,
)
from .sampler import SamplerConfig, Trace, map_estimate, run_chain

log = logging.getLogger(__name__)

PROBLEMS = ("logistic", "burgers")
UNMET_LIMIT = 0.01
PARAM_NAMES = {"logistic": ("r", "K"), "burgers": ("jump", "z0")}


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one fine/adaptive experiment.

    ``fine`` and ``adaptive_start`` are a step size for the logistic problem
    and a cell count for Burgers. ``tolerance`` overrides the admissible
    error from the bound. ``model`` holds the problem constants that are not
    sampled (``X0`` for logistic; ``u_L``, ``z1`` and ``epsilon`` for
    Burgers). ``seed`` drives the data; ``chain_seed`` (default ``seed + 1``)
    drives the fine chain and, unless ``adaptive_seed`` is set, the
    adaptive one too. Shared seeds couple the two chains, so any difference
    between them comes from the forward solver rather than Monte Carlo
    noise.
    """

    problem: str
    theta_true: list[float]
    sigma: float
    locations: list[float]
    priors: dict
    model: dict
    fine: float
    adaptive_start: float
    adaptive_max: float | None = None
    iterations: int = 1000
    burn_in: int | None = None
    seed: int = 0
    chain_seed: int | None = None
    adaptive_seed: int | None = None
    initial: list[float] | None = None
    scales: list[float] | None = None
    tolerance: float | None = None
    target_eabf: float = 0.05
    k: float | None = None
    precision: dict = field(default_factory=dict)
    calibration_grids: list[int] = field(default_factory=lambda: [64, 128, 256, 512])
    out_dir: str | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        d = len(PARAM_NAMES[self.problem])
        if len(self.theta_true) != d:
            raise ValueError(f"{self.problem} has {d} parameters, got {len(self.theta_true)}")
        for name, vec in (("initial", self.initial), ("scales", self.scales)):
            if vec is not None and len(vec) != d:
                raise ValueError(f"{name} must have {d} entries")
        if set(self.priors) != set(PARAM_NAMES[self.problem]):
            raise ValueError(f"priors must cover {PARAM_NAMES[self.problem]}")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")
        if self.chain_seed is None:
            self.chain_seed = self.seed + 1
        if self.adaptive_seed is None:
            self.adaptive_seed = self.chain_seed
        if self.seed in (self.chain_seed, self.adaptive_seed):
            raise ValueError("chain seeds must differ from the data seed")

    @property
    def names(self) -> tuple[str, ...]:
        return PARAM_NAMES[self.problem]

    @classmethod
    def default(cls, problem: str, **overrides) -> "ExperimentConfig":
        if problem == "logistic":
            c = constants.LOGISTIC
            base = dict(
                theta_true=[c["r"], c["K"]],
                sigma=c["sigma"],
                locations=constants.LOGISTIC_TIMES.tolist(),
                priors=c["priors"],
                model={"X0": c["X0"]},
                fine=c["h_fine"],
                adaptive_start=c["h_init"],
                iterations=c["iterations"],
                scales=list(c["proposal_scales"]),
            )
        elif problem == "burgers":
            c = constants.BURGERS
            base = dict(
                theta_true=[c["u_L"] - c["u_R"], c["z0"]],
                sigma=c["sigma"],
                locations=constants.BURGERS_TIMES.tolist(),
                priors=c["priors"],
                model={"u_L": c["u_L"], "z1": c["z1"], "epsilon": c["epsilon"], "cfl": c["cfl"]},
                fine=c["N_fine"],
                adaptive_start=c["N_start"],
                adaptive_max=c["N_fine"],
                iterations=c["iterations"],
                scales=list(c["proposal_scales"]),
            )
        else:
            raise ValueError(f"unknown problem {problem!r}")
        base.update(overrides)
        return cls(problem=problem, **base)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        problem = d.pop("problem")
        return cls.default(problem, **d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


# --------------------------------------------------------------------------
# synthetic data
# --------------------------------------------------------------------------


def exact_forward(problem: str, locations, model: dict):
    if problem == "logistic":
        return ExactLogisticForward(locations, model["X0"])
    if problem == "burgers":
        return ExactBurgersForward(locations, model["z1"], model["u_L"], model["epsilon"])
    raise ValueError(f"unknown problem {problem!r}")


def generate_synthetic(problem: str, theta_true, sigma: float, locations, seed: int, model: dict | None = None) -> Dataset:
    """``y_i = exact(x_i; theta_true) + sigma * xi_i`` with seeded standard normals."""
    if model is None:
        model = ExperimentConfig.default(problem).model
    f = exact_forward(problem, locations, model)(np.asarray(theta_true, dtype=float)).values
    rng = np.random.Generator(np.random.PCG64(seed))
    y = f + sigma * rng.standard_normal(f.size)
    return Dataset(y=y, locations=Locations(np.asarray(locations, dtype=float)))


def write_dataset(path, data: Dataset, provenance: dict) -> None:
    doc = {
        "locations": data.locations.points[:, 0].tolist(),
        "y": data.y.tolist(),
        "provenance": provenance,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def read_dataset(path) -> tuple[Dataset, dict]:
    with open(path) as fh:
        doc = json.load(fh)
    return Dataset(y=np.asarray(doc["y"]), locations=Locations(np.asarray(doc["locations"]))), doc.get("provenance", {})


# --------------------------------------------------------------------------
# comparison
# --------------------------------------------------------------------------


@dataclass
class MarginalHistogram:
    edges: np.ndarray
    p_a: np.ndarray
    p_b: np.ndarray


@dataclass
class ComparisonReport:
    names: tuple[str, ...]
    tv: list[float]
    mean_delta: list[float]
    map_delta: list[float]
    wall_time_ratio: float
    bins: int
    bound: dict | None = None
    histograms: list[MarginalHistogram] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "tv": self.tv,
            "mean_delta_sd": self.mean_delta,
            "map_delta_sd": self.map_delta,
            "wall_time_ratio": self.wall_time_ratio,
            "bins": self.bins,
            "bound": self.bound,
        }

    def write_histograms(self, out_dir) -> list[Path]:
        paths = []
        for name, h in zip(self.names, self.histograms):
            p = Path(out_dir) / f"hist_{name}.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["lo", "hi", "p_fine", "p_adaptive"])
                for lo, hi, a, b in zip(h.edges[:-1], h.edges[1:], h.p_a, h.p_b):
                    w.writerow([repr(float(lo)), repr(float(hi)), repr(float(a)), repr(float(b))])
            paths.append(p)
        return paths


def _delta_in_sd(a: float, b: float, sd: float) -> float:
    if sd > 0:
        return abs(a - b) / sd
    return 0.0 if a == b else math.inf


def compare_traces(a: Trace, b: Trace, bins: int = 50, bound: dict | None = None) -> ComparisonReport:
    """Binned total-variation distance and moment deltas per marginal.

    Both traces share bin edges spanning their pooled range. Deltas are in
    units of the pooled posterior standard deviation.
    """
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both traces must be non-empty")
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    map_a, map_b = map_estimate(a), map_estimate(b)
    tv, dmean, dmap, hists = [], [], [], []
    for j in range(a.dim):
        xa, xb = a.samples[:, j], b.samples[:, j]
        lo = min(xa.min(), xb.min())
        hi = max(xa.max(), xb.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.linspace(lo, hi, bins + 1)
        pa = np.histogram(xa, edges)[0] / xa.size
        pb = np.histogram(xb, edges)[0] / xb.size
        tv.append(float(min(1.0, 0.5 * np.abs(pa - pb).sum())))
        sd = math.sqrt(0.5 * (xa.var() + xb.var()))
        dmean.append(_delta_in_sd(xa.mean(), xb.mean(), sd))
        dmap.append(_delta_in_sd(map_a[j], map_b[j], sd))
        hists.append(MarginalHistogram(edges, pa, pb))
    ratio = b.wall_time / a.wall_time if a.wall_time > 0 else math.nan
    return ComparisonReport(
        names=tuple(a.names),
        tv=tv,
        mean_delta=dmean,
        map_delta=dmap,
        wall_time_ratio=ratio,
        bins=bins,
        bound=bound,
        histograms=hists,
    )


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------


def noise_model(config: ExperimentConfig) -> NoiseModel:
    return NoiseModel(sigma=config.sigma)


def tolerance_report(config: ExperimentConfig) -> ToleranceReport:
    locs = Locations(np.asarray(config.locations, dtype=float))
    prec = build_precision(PrecisionSpec.from_dict(config.precision), locs)
    return admissible_K0(
        n=locs.n,
        sigma_star=sigma_star(noise_model(config)),
        factor=correlation_factor(prec),
        target_eabf=config.target_eabf,
        k=config.k,
    )


def build_problem(config: ExperimentConfig, data: Dataset, forward) -> PosteriorProblem:
    prec = build_precision(PrecisionSpec.from_dict(config.precision), data.locations)
    prior = PriorSpec.from_dict({k: config.priors[k] for k in config.names})
    return PosteriorProblem(data=data, precision=prec, noise=noise_model(config), prior=prior, forward=forward)


def calibrate_burgers(config: ExperimentConfig) -> dict:
    """Observation-point error constant at the true parameters."""
    m = config.model
    p = burgers_params(config.theta_true, m["u_L"], m["epsilon"])
    return calibrate_observation_K0(p, m["z1"], config.locations, grids=config.calibration_grids)


def make_forwards(config: ExperimentConfig, K0: float | None = None) -> dict:
    m = config.model
    if config.problem == "logistic":
        return {
            "fine": LogisticForward(config.locations, m["X0"], h_fixed=config.fine),
            "adaptive": LogisticForward(config.locations, m["X0"], h_init=config.adaptive_start),
        }
    common = dict(times=config.locations, z1=m["z1"], u_L=m["u_L"], epsilon=m["epsilon"], K0=K0, cfl=m.get("cfl", 0.1))
    return {
        "fine": BurgersForward(N_fixed=int(config.fine), **common),
        "adaptive": BurgersForward(
            N_start=int(config.adaptive_start), N_max=int(config.adaptive_max or config.fine), **common
        ),
    }


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    data: Dataset
    tolerance: float
    bound: ToleranceReport
    traces: dict[str, Trace]
    report: ComparisonReport | None
    calibration: dict | None = None

    @property
    def unmet_rates(self) -> dict[str, float]:
        return {k: t.solver_stats.unmet_rate for k, t in self.traces.items()}

    @property
    def bound_violating(self) -> bool:
        return any(r > UNMET_LIMIT for r in self.unmet_rates.values())

    def summary(self) -> dict:
        return {
            "problem": self.config.problem,
            "tolerance": self.tolerance,
            "bound": self.bound.to_dict(),
            "seeds": {"data": self.config.seed, "fine": self.config.chain_seed, "adaptive": self.config.adaptive_seed},
            "runs": {k: t.summary() for k, t in self.traces.items()},
            "unmet_rates": self.unmet_rates,
            "bound_violating": self.bound_violating,
            "comparison": self.report.to_dict() if self.report else None,
            "calibration": self.calibration,
        }


def run_experiment(config: ExperimentConfig, runs=("fine", "adaptive"), data: Dataset | None = None) -> ExperimentResult:
    """Generate data, run the requested chains and compare them.

    Artifacts are written to ``config.out_dir`` when it is set.
    """
    out = Path(config.out_dir) if config.out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        config.to_json(out / "config.json")

    if data is None:
        data = generate_synthetic(config.problem, config.theta_true, config.sigma, config.locations, config.seed, config.model)
    if out is not None:
        write_dataset(
            out / "data.json",
            data,
            {"problem": config.problem, "theta_true": list(config.theta_true), "sigma": config.sigma, "seed": config.seed},
        )

    bound = tolerance_report(config)
    tol = bound.K0_admissible if config.tolerance is None else float(config.tolerance)
    log.info("solver tolerance %.6g (admissible %.6g)", tol, bound.K0_admissible)

    calibration = None
    K0 = None
    if config.problem == "burgers":
        calibration = calibrate_burgers(config)
        K0 = calibration["K0"]
        log.info("calibrated Burgers error constant %.6g", K0)
        if out is not None:
            with open(out / "calibration.json", "w") as fh:
                json.dump(calibration, fh, indent=2)

    forwards = make_forwards(config, K0)
    initial = config.initial if config.initial is not None else config.theta_true
    traces = {}
    for name in runs:
        problem = build_problem(config, data, forwards[name])
        sc = SamplerConfig(
            iterations=config.iterations,
            burn_in=config.burn_in,
            seed=config.adaptive_seed if name == "adaptive" else config.chain_seed,
            initial=initial,
            scales=config.scales,
        )
        log.info("running %s chain (%d iterations)", name, config.iterations)
        tr = run_chain(lambda th, p=problem: p.log_posterior(th, tol), sc, bounds=problem.bounds, names=config.names)
        traces[name] = tr
        if out is not None:
            tr.to_csv(out / f"{name}_trace.csv")
            tr.write_summary(out / f"{name}_summary.json")

    report = None
    if "fine" in traces and "adaptive" in traces and len(traces["fine"]) and len(traces["adaptive"]):
        report = compare_traces(traces["fine"], traces["adaptive"], bound={**bound.to_dict(), "tolerance": tol})
        if out is not None:
            report.write_histograms(out)

    result = ExperimentResult(config, data, tol, bound, traces, report, calibration)
    if out is not None:
        with open(out / "report.json", "w") as fh:
            json.dump(result.summary(), fh, indent=2)
    return result
