import json
import math

import numpy as np
import pytest

from numpost.analytic import LogisticParams, logistic_exact
from numpost.bound import admissible_K0
from numpost.constants import BURGERS, BURGERS_TIMES, LOGISTIC, LOGISTIC_TIMES
from numpost.experiments import (
    ExperimentConfig,
    build_problem,
    compare_traces,
    generate_synthetic,
    read_dataset,
    run_experiment,
    tolerance_report,
)
from numpost.forward import BurgersForward, ExactLogisticForward, LogisticForward
from numpost.sampler import SamplerConfig, Trace, map_estimate, run_chain


class TestSynthetic:
    def test_noiseless(self):
        d = generate_synthetic("logistic", [1.0, 1000.0], 0.0, LOGISTIC_TIMES, seed=1)
        assert np.array_equal(d.y, logistic_exact(LOGISTIC_TIMES, LogisticParams(1.0, 1000.0, 100.0)))

    @pytest.mark.parametrize("seed", range(5))
    def test_logistic_residuals_centred(self, seed):
        d = generate_synthetic("logistic", [1.0, 1000.0], 30.0, LOGISTIC_TIMES, seed=seed)
        z = (d.y - logistic_exact(LOGISTIC_TIMES, LogisticParams(1.0, 1000.0, 100.0))) / 30.0
        assert z.size == 26
        assert abs(z.mean()) <= 3 / math.sqrt(26)

    def test_burgers_range(self):
        s = BURGERS["sigma"]
        d = generate_synthetic("burgers", [1.0, 1.0], s, BURGERS_TIMES, seed=3)
        assert d.n == 6
        assert np.all((d.y >= 1.0 - 5 * s) & (d.y <= 2.0 + 5 * s))

    def test_seeded(self):
        a = generate_synthetic("burgers", [1.0, 1.0], 0.01, BURGERS_TIMES, seed=3)
        b = generate_synthetic("burgers", [1.0, 1.0], 0.01, BURGERS_TIMES, seed=3)
        assert np.array_equal(a.y, b.y)


class TestCompare:
    def _trace(self, x, wall=1.0):
        x = np.asarray(x, dtype=float).reshape(len(x), -1)
        return Trace(samples=x, log_posts=-0.5 * (x**2).sum(axis=1), wall_time=wall)

    def test_identical(self):
        x = np.random.default_rng(0).normal(size=(1000, 2))
        rep = compare_traces(self._trace(x), self._trace(x))
        assert rep.tv == [0.0, 0.0] and rep.mean_delta == [0.0, 0.0]

    def test_disjoint(self):
        rng = np.random.default_rng(1)
        rep = compare_traces(self._trace(rng.uniform(0, 1, 500)), self._trace(rng.uniform(5, 6, 500)))
        assert rep.tv == [1.0]

    def test_independent_draws_same_target(self):
        rng = np.random.default_rng(2)
        rep = compare_traces(self._trace(rng.normal(size=10_000)), self._trace(rng.normal(size=10_000)))
        assert rep.tv[0] <= 0.08

    def test_tv_in_unit_interval(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a, b = rng.normal(size=(200, 3)), rng.normal(0.5, 2, size=(300, 3))
            assert all(0 <= t <= 1 for t in compare_traces(self._trace(a), self._trace(b)).tv)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            compare_traces(self._trace(np.zeros((10, 2))), self._trace(np.zeros((10, 3))))

    def test_wall_time_ratio_and_histograms(self, tmp_path):
        rng = np.random.default_rng(4)
        rep = compare_traces(self._trace(rng.normal(size=100), 4.0), self._trace(rng.normal(size=100), 1.0), bins=10)
        assert rep.wall_time_ratio == 0.25
        (path,) = rep.write_histograms(tmp_path)
        rows = path.read_text().splitlines()
        assert len(rows) == 11


class TestConfig:
    def test_defaults_match_constants(self):
        cfg = ExperimentConfig.default("logistic")
        assert cfg.theta_true == [1.0, 1000.0] and cfg.sigma == 30.0
        assert len(cfg.locations) == 26 and cfg.fine == 0.005 and cfg.adaptive_start == 0.1
        b = ExperimentConfig.default("burgers")
        assert b.theta_true == [1.0, 1.0] and b.fine == 512 and b.adaptive_start == 128

    def test_wrong_dimension(self):
        with pytest.raises(ValueError):
            ExperimentConfig.default("logistic", theta_true=[1.0])
        with pytest.raises(ValueError):
            ExperimentConfig.default("burgers", initial=[1.0, 1.0, 1.0])

    def test_unknown_problem(self):
        with pytest.raises(ValueError):
            ExperimentConfig.default("heat")

    def test_seed_isolation(self):
        cfg = ExperimentConfig.default("logistic", seed=7)
        assert cfg.chain_seed == 8
        with pytest.raises(ValueError):
            ExperimentConfig.default("logistic", seed=7, chain_seed=7)
        with pytest.raises(ValueError):
            ExperimentConfig.default("logistic", seed=7, adaptive_seed=7)

    def test_adaptive_seed_defaults_to_chain_seed(self):
        cfg = ExperimentConfig.default("logistic", seed=7)
        assert cfg.adaptive_seed == cfg.chain_seed
        assert ExperimentConfig.default("logistic", seed=7, adaptive_seed=20).adaptive_seed == 20

    def test_json_roundtrip(self, tmp_path):
        cfg = ExperimentConfig.default("burgers", iterations=123, seed=4)
        cfg.to_json(tmp_path / "c.json")
        assert ExperimentConfig.from_json(tmp_path / "c.json") == cfg

    def test_tolerance_is_the_bound(self):
        assert tolerance_report(ExperimentConfig.default("logistic")).K0_admissible == admissible_K0(26, 30.0).K0_admissible
        assert tolerance_report(ExperimentConfig.default("burgers")).K0_admissible == admissible_K0(6, 0.0115).K0_admissible


class TestRun:
    def test_smoke_emits_artifacts(self, tmp_path):
        cfg = ExperimentConfig.default("logistic", iterations=200, out_dir=str(tmp_path))
        res = run_experiment(cfg)
        for name in [
            "config.json",
            "data.json",
            "fine_trace.csv",
            "adaptive_trace.csv",
            "fine_summary.json",
            "adaptive_summary.json",
            "hist_r.csv",
            "hist_K.csv",
            "report.json",
        ]:
            assert (tmp_path / name).exists(), name
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["tolerance"] == admissible_K0(26, 30.0).K0_admissible
        assert report["seeds"]["data"] != report["seeds"]["fine"]
        assert report["bound_violating"] is False
        data, prov = read_dataset(tmp_path / "data.json")
        assert np.array_equal(data.y, res.data.y) and prov["seed"] == cfg.seed

    def test_burgers_smoke_writes_calibration(self, tmp_path):
        cfg = ExperimentConfig.default(
            "burgers", iterations=60, fine=128, adaptive_start=64, adaptive_max=128, out_dir=str(tmp_path)
        )
        res = run_experiment(cfg)
        cal = json.loads((tmp_path / "calibration.json").read_text())
        assert cal["K0"] == res.calibration["K0"] > 0
        # the cap keeps the adaptive run below the admissible error
        assert res.bound_violating

    def test_tolerance_override(self):
        cfg = ExperimentConfig.default("logistic", iterations=20, tolerance=0.5)
        res = run_experiment(cfg, runs=("adaptive",))
        assert res.tolerance == 0.5 and res.report is None

    def test_bound_violation_flag(self):
        cfg = ExperimentConfig.default("burgers", iterations=20, tolerance=1e-9, adaptive_max=128)
        res = run_experiment(cfg, runs=("adaptive",))
        assert res.unmet_rates["adaptive"] == 1.0 and res.bound_violating


def test_noiseless_posterior_concentrates():
    theta = np.array([1.0, 1000.0])
    cfg = ExperimentConfig.default("logistic", sigma=1e-6)
    data = generate_synthetic("logistic", theta, 1e-6, LOGISTIC_TIMES, seed=0)
    prob = build_problem(cfg, data, ExactLogisticForward(LOGISTIC_TIMES, 100.0))
    start = theta * (1 + 1e-8)
    tr = run_chain(
        lambda th: prob.log_posterior(th, math.inf),
        SamplerConfig(iterations=3000, initial=start, scales=[1e-8, 1e-5], seed=1),
        bounds=prob.bounds,
    )
    assert np.all(np.abs(map_estimate(tr) - theta) <= 1e-3 * theta)


def test_forward_evaluators_report_tolerance():
    lf = LogisticForward(LOGISTIC_TIMES, 100.0, h_fixed=0.1)
    res = lf([1.0, 1000.0], 1e-12)
    assert not res.tolerance_met and res.K0_hat > 1e-12
    bf = BurgersForward(BURGERS_TIMES, 2.0, 2.0, 0.2, N_fixed=128, K0=0.9)
    res = bf([1.0, 1.0], 1.0)
    assert res.tolerance_met and res.N_used == 128
    with pytest.raises(ValueError):
        BurgersForward(BURGERS_TIMES, 2.0, 2.0, 0.2)
