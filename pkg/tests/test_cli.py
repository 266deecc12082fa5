import json
import subprocess
import sys

import numpy as np
import pytest

from kalman_bench import csvio
from kalman_bench.cli import main
from kalman_bench.config import RunConfig
from kalman_bench.sim import run_pipeline


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _rows(path):
    return len(csvio.read_series(path)[0])


def test_simulate_freefall_writes_1000_rows(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--scenario", "freefall", "--seed", 1, "--out", tmp_path)
    assert code == 0
    assert _rows(tmp_path / "measurements.csv") == 1000
    _, cols, meta = csvio.read_series(tmp_path / "truth.csv")
    assert list(cols) == ["x", "v"]
    assert meta["seed"] == "1" and meta["config_hash"] == RunConfig(scenario="freefall", seed=1).digest()


def test_simulate_reentry_duration(tmp_path, capsys):
    code, _, _ = run(capsys, "simulate", "--scenario", "reentry", "--duration", 200, "--out", tmp_path)
    assert code == 0 and _rows(tmp_path / "measurements.csv") == 2000


def test_default_output_root_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("KALMAN_BENCH_OUT", str(tmp_path))
    code, _, _ = run(capsys, "simulate", "--scenario", "lotka_volterra", "--seed", 4, "--duration", 1)
    assert code == 0 and (tmp_path / "lotka_volterra-seed4" / "measurements.csv").exists()


def test_zero_noise_measurements_equal_truth(tmp_path, capsys):
    run(capsys, "simulate", "--scenario", "freefall", "--zero-noise", "--out", tmp_path)
    _, truth, _ = csvio.read_series(tmp_path / "truth.csv")
    _, meas, _ = csvio.read_series(tmp_path / "measurements.csv")
    assert np.array_equal(truth["x"], meas["x"]) and np.array_equal(truth["v"], meas["v"])


@pytest.mark.parametrize(
    "scenario, extra",
    [("freefall", []), ("freefall", ["--observe", "height_only"]), ("lotka_volterra", []), ("freefall_drag", ["--filter", "ukf"])],
)
def test_roundtrip_is_bit_identical(tmp_path, capsys, scenario, extra):
    args = ["--scenario", scenario, "--seed", 5, "--duration", 2, *extra]
    assert run(capsys, "simulate", *args, "--out", tmp_path)[0] == 0
    assert run(capsys, "filter", tmp_path)[0] == 0
    config = RunConfig.from_dict(json.loads((tmp_path / "config.json").read_text()))
    _, rec = run_pipeline(config)
    _, est, _ = csvio.read_series(tmp_path / "estimates.csv")
    _, res, _ = csvio.read_series(tmp_path / "residuals.csv")
    _, cov, _ = csvio.read_series(tmp_path / "covariance_diag.csv")
    for j, name in enumerate(rec.state_names):
        assert np.array_equal(est[name], rec.x_hat[:, j])
        assert np.array_equal(cov[f"var_{name}"], rec.p_diag[:, j])
    for j, name in enumerate(rec.meas_names):
        assert np.array_equal(res[name], rec.residuals[:, j])
        assert np.array_equal(res[f"innov_{name}"], rec.innovations[:, j])


def test_freefall_bkf_residual_below_raw_noise(tmp_path, capsys):
    run(capsys, "simulate", "--scenario", "freefall", "--out", tmp_path)
    run(capsys, "filter", tmp_path)
    _, truth, _ = csvio.read_series(tmp_path / "truth.csv")
    _, est, _ = csvio.read_series(tmp_path / "estimates.csv")
    assert np.std(est["x"] - truth["x"]) < 0.01


def test_reentry_bkf_is_rejected(tmp_path, capsys):
    run(capsys, "simulate", "--scenario", "reentry", "--duration", 1, "--out", tmp_path)
    code, _, err = run(capsys, "filter", tmp_path, "--filter", "bkf")
    assert code != 0
    assert err.startswith("error: IncompatibleFilterError:") and err.count("\n") == 1
    assert not (tmp_path / "estimates.csv").exists()


def test_invalid_config_names_key(capsys):
    code, _, err = run(capsys, "simulate", "--scenario", "freefall", "--alpha", 2, "--out", "/nonexistent/x")
    assert code != 0 and "alpha" in err and err.count("\n") == 1
    code, _, err = run(capsys, "simulate", "--scenario", "mars")
    assert code == 2 and err.startswith("error: usage:") and err.count("\n") == 1


def test_malformed_csv_has_line_number(tmp_path, capsys):
    run(capsys, "simulate", "--scenario", "freefall", "--duration", 0.05, "--out", tmp_path)
    path = tmp_path / "measurements.csv"
    lines = path.read_text().splitlines()
    lines[8] = "0.03,abc,1.0"
    path.write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, "filter", tmp_path)
    assert code != 0 and "measurements.csv:9:" in err


def test_report_missing_inputs(tmp_path, capsys):
    run(capsys, "simulate", "--scenario", "freefall", "--duration", 0.05, "--out", tmp_path)
    code, _, err = run(capsys, "report", tmp_path)
    assert code != 0 and "estimates.csv" in err


def test_report_zero_noise(tmp_path, capsys):
    run(capsys, "simulate", "--scenario", "freefall", "--zero-noise", "--out", tmp_path)
    run(capsys, "filter", tmp_path)
    assert run(capsys, "report", tmp_path)[0] == 0
    text = (tmp_path / "report.txt").read_text()
    chi2 = float(next(l for l in text.splitlines() if l.startswith("reduced_chi2")).split("=")[1])
    assert chi2 < 1e-12
    assert "config.scenario = freefall" in text
    assert (tmp_path / "plotdata" / "residuals_vs_time.csv").exists()
    _, cols, _ = csvio.read_series(tmp_path / "plotdata" / "error_vs_time.csv")
    assert {"est_err_x", "raw_err_x", "sigma_v"} <= set(cols)


def test_report_contains_fit_fields(tmp_path, capsys):
    run(capsys, "simulate", "--scenario", "freefall", "--out", tmp_path)
    run(capsys, "filter", tmp_path)
    run(capsys, "report", tmp_path)
    text = (tmp_path / "report.txt").read_text()
    for key in ("reduced_chi2 =", "rmse_x =", "noise_reduction_v =", "dof = 2000"):
        assert key in text


def test_sweep_writes_table_and_subdirectories(tmp_path, capsys):
    run(capsys, "simulate", "--scenario", "freefall_drag", "--filter", "ukf", "--duration", 1, "--out", tmp_path)
    run(capsys, "filter", tmp_path)
    code, out, _ = run(capsys, "report", tmp_path, "--sweep-alpha", "1e-3,0.5", "--sweep-kappa", "-1,0")
    assert code == 0 and "sweep_spread" in out
    subdirs = sorted(p.name for p in (tmp_path / "sweep").iterdir())
    assert subdirs == ["alpha_0.001_kappa_-1", "alpha_0.001_kappa_0", "alpha_0.5_kappa_-1", "alpha_0.5_kappa_0"]
    _, cols, _ = csvio.read_series(tmp_path / "sweep.csv")
    assert len(cols["reduced_chi2"]) == 4


def test_sweep_rejects_vanishing_scaling(tmp_path, capsys):
    # N = 2 and kappa = -2 make N + lambda zero
    run(capsys, "simulate", "--scenario", "freefall_drag", "--filter", "ukf", "--duration", 0.1, "--out", tmp_path)
    run(capsys, "filter", tmp_path)
    code, _, err = run(capsys, "report", tmp_path, "--sweep-alpha", "0.5", "--sweep-kappa", "-2")
    assert code != 0 and err.startswith("error: ZeroDivisionError:")


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "kalman_bench", "simulate", "--scenario", "freefall", "--duration", "0.1", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert _rows(tmp_path / "measurements.csv") == 10


def test_csv_roundtrip_preserves_bits(tmp_path):
    vals = np.array([0.1, 1 / 3, -2.5e-300, 123456789.123456789, np.nextafter(1.0, 2.0)])
    csvio.write_series(tmp_path / "a.csv", np.arange(1.0, 6.0), {"y": vals}, {"k": "v"})
    t, cols, meta = csvio.read_series(tmp_path / "a.csv")
    assert np.array_equal(cols["y"], vals) and meta == {"k": "v"}
