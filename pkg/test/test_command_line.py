"""
End to end runs of the command line tool through :func:`mepoisson.CommandLine.main`.
"""

import io
import json
import logging

import numpy as np
import pandas as pd
import pytest

import mepoisson
from mepoisson.CommandLine import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main
from mepoisson.DataIO import read_matrix, write_dataset, write_matrix
from mepoisson.Errors import SingularHessian
from mepoisson.Simulation import TABLE_COLUMNS

from conftest import poisson_data


@pytest.fixture(autouse=True)
def release_warnings():
    yield
    logging.captureWarnings(False)


@pytest.fixture
def data_file(tmp_path):
    path = tmp_path / "data.csv"
    write_dataset(path, poisson_data(21, 150, 5, omega_scale=0.05))
    write_matrix(tmp_path / "omega.csv", 0.05 * np.eye(5))
    return path


def test_fit(data_file, tmp_path):
    out = tmp_path / "fit.json"
    omega = str(tmp_path / "omega.csv")
    code = main(["fit", "--data", str(data_file), "--omega", omega, "--lambda-grid", "0.2", "-o", str(out)])
    assert code == EXIT_OK
    result = json.loads(out.read_text())
    assert len(result["beta"]) == 5
    assert result["names"] == ["w1", "w2", "w3", "w4", "w5"]
    assert result["lambda"] == 0.2
    assert {1, 2} <= set(result["support"])


def test_fit_under_a_null(data_file, tmp_path, capsys):
    hyp = tmp_path / "hyp.json"
    hyp.write_text(json.dumps({"C": [[1.0]], "t": [0.5], "M": [1]}))
    code = main(["fit", "--data", str(data_file), "--hyp", str(hyp), "--null", "--lambda-grid", "0.2"])
    assert code == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["beta"][0] == pytest.approx(0.5, abs=1e-6)
    assert main(["fit", "--data", str(data_file), "--null"]) == EXIT_USAGE


def test_test_command(data_file, tmp_path, capsys):
    hyp = tmp_path / "hyp.json"
    hyp.write_text(json.dumps({"C": [1.0], "t": 0.0, "M": [2]}))
    args = ["test", "--data", str(data_file), "--omega", str(tmp_path / "omega.csv"), "--hyp", str(hyp)]
    assert main(args + ["--lambda-grid", "0.1,0.2"]) == EXIT_OK
    results = json.loads(capsys.readouterr().out)
    assert [r["kind"] for r in results] == ["wald", "score"]
    assert all(r["p_value"] < 0.05 for r in results)

    assert main(args + ["--kind", "wald", "--naive", "--alternative", "less", "--lambda-grid", "0.2"]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["naive"] and result["alternative"] == "less"


def test_screen_command(data_file, capsys):
    code = main(["screen", "--data", str(data_file), "--columns", "1,3", "--lambda-grid", "0.2", "--workers", "1"])
    assert code == EXIT_OK
    rows = json.loads(capsys.readouterr().out)
    assert [row["index"] for row in rows] == [1, 3]
    assert [row["name"] for row in rows] == ["w1", "w3"]
    assert rows[0]["rejected"]


def test_simulate_command(capsys):
    args = ["simulate", "--design", "h02", "--n", "80", "--p", "5", "--reps", "2", "--h", "0", "--workers", "1"]
    assert main(args + ["--lambda-grid", "0.3"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split("\t") == TABLE_COLUMNS
    assert len(lines) == 2
    assert lines[1].split("\t")[0] == "H02"


def test_estimate_omega_command(tmp_path):
    rng = np.random.default_rng(3)
    frame = pd.DataFrame(
        {
            "subject": np.repeat(np.arange(30), 2),
            "visit": np.tile([1, 2], 30),
            "age": np.repeat(rng.uniform(60, 80, 30), 2) + np.tile([0.0, 1.0], 30),
            "f1": rng.standard_normal(60),
            "f2": rng.standard_normal(60),
        }
    )
    frame.to_csv(tmp_path / "panel.csv", index=False)
    out = tmp_path / "omega.csv"
    args = ["estimate-omega", "--panel", str(tmp_path / "panel.csv"), "--p", "3", "--error-free", "1", "-o", str(out)]
    assert main(args) == EXIT_OK
    omega = read_matrix(out)
    assert omega.shape == (3, 3)
    assert not np.any(omega[0]) and not np.any(omega[:, 0])
    assert omega[1, 1] > 0


def test_predict_command(data_file, tmp_path, capsys):
    coef = tmp_path / "coef.json"
    coef.write_text(json.dumps({"beta": [0.5, -0.5, 0.0, 0.0, 0.0]}))
    assert main(["predict", "--data", str(data_file), "--coef", str(coef)]) == EXIT_OK
    frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
    assert list(frame.columns) == ["prediction", "y"]
    assert len(frame) == 150
    assert (frame["prediction"] > 0).all()

    assert main(["predict", "--data", str(data_file), "--cv", "3", "--lambda-grid", "0.2"]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert len(result["fold_errors"]) == 3
    assert result["mean_error"] == pytest.approx(np.mean(result["fold_errors"]))

    assert main(["predict", "--data", str(data_file)]) == EXIT_USAGE


def test_usage_errors(data_file, tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["fit"]) == EXIT_USAGE
    assert main(["fit", "--data", str(data_file), "--penalty", "lasso"]) == EXIT_USAGE
    assert main(["fit", "--data", str(tmp_path / "missing.csv")]) == EXIT_USAGE
    assert main(["fit", "--data", str(data_file), "--omega", "zero", "--rho", "-1"]) == EXIT_USAGE
    assert "mepoisson" in capsys.readouterr().err


def test_numerical_failure_exit_code(data_file, monkeypatch, capsys):
    def failing(*args, **kwargs):
        raise SingularHessian("Newton system not positive definite")

    monkeypatch.setattr(mepoisson, "select_lambda", failing)
    assert main(["fit", "--data", str(data_file)]) == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err
