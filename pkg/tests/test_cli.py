import json

import pytest

from numpost.cli import EXIT_BOUND_VIOLATION, main


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_bound_logistic(capsys):
    assert main(["bound", "--n", "26", "--sigma", "30"]) == 0
    rep = _json(capsys)
    assert 0.1446 <= rep["K0_admissible"] <= 0.1447


def test_bound_rounded_constant(capsys):
    assert main(["bound", "--n", "26", "--sigma", "30", "--rounded-k"]) == 0
    assert _json(capsys)["K0_admissible"] == pytest.approx(0.12 * 30 / 26)


def test_bound_sigma_prior(capsys):
    assert main(["bound", "--n", "1", "--sigma-prior", '{"dist": "gamma", "shape": 3, "rate": 1}']) == 0
    assert _json(capsys)["sigma_star"] == pytest.approx(2.0, rel=1e-8)


def test_bound_divergent_prior(capsys):
    assert main(["bound", "--n", "1", "--sigma-prior", '{"dist": "gamma", "shape": 1, "rate": 1}']) == 2


def test_bound_from_config_with_correlation(tmp_path, capsys):
    cfg = {
        "sigma": 1.0,
        "locations": [0, 1, 2, 3],
        "precision": {"kind": "isotropic", "correlation": "exponential", "length_scale": 1.0},
    }
    (tmp_path / "b.json").write_text(json.dumps(cfg))
    assert main(["bound", "--config", str(tmp_path / "b.json"), "--out", str(tmp_path)]) == 0
    rep = _json(capsys)
    assert rep["n"] == 4 and rep["correlation_factor"] > 1
    assert (tmp_path / "bound.json").exists()


def test_gen_data(tmp_path, capsys):
    assert main(["gen-data", "burgers", "--seed", "9", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "data.json").read_text())
    assert doc["provenance"]["seed"] == 9 and len(doc["y"]) == 6


def test_run_ode_and_compare(tmp_path, capsys):
    out = tmp_path / "ode"
    assert main(["run-ode", "--iterations", "40", "--out", str(out), "--seed", "3"]) == 0
    summary = _json(capsys)
    assert summary["seeds"] == {"data": 3, "fine": 4, "adaptive": 4}
    assert main(["compare", str(out / "fine_trace.csv"), str(out / "adaptive_trace.csv"), "--out", str(tmp_path / "c")]) == 0
    rep = _json(capsys)
    assert rep["names"] == ["r", "K"] and rep["wall_time_ratio"] > 0
    assert (tmp_path / "c" / "hist_r.csv").exists()


def test_run_pde_exit_code(tmp_path, capsys):
    cfg = {"problem": "burgers", "adaptive_max": 128, "calibration_grids": [64, 128]}
    (tmp_path / "p.json").write_text(json.dumps(cfg))
    args = ["run-pde", "--config", str(tmp_path / "p.json"), "--iterations", "10", "--adaptive", "--tolerance", "1e-9"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_BOUND_VIOLATION
    assert main(args + ["--out", str(tmp_path / "b"), "--allow-unmet"]) == 0


def test_config_problem_mismatch(tmp_path):
    (tmp_path / "p.json").write_text(json.dumps({"problem": "logistic"}))
    with pytest.raises(SystemExit):
        main(["run-pde", "--config", str(tmp_path / "p.json")])


def test_calibrate(tmp_path, capsys):
    assert main(["calibrate-burgers-k0", "--grids", "64,128,256", "--ratio", "--out", str(tmp_path)]) == 0
    doc = _json(capsys)
    assert doc["observation_fit"]["K0"] > 0 and doc["ratio_fit"]["K0"] > 0
    assert (tmp_path / "calibration.json").exists()
