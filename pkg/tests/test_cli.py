import json
import os
import subprocess
import sys

import numpy as np
import pytest

from logbilinear.cli import main
from logbilinear.design import DesignSpec, build_model_matrices
from logbilinear.power import HypothesisSpec, PowerRequest, power_at

from golden_cases import CASES, DATA, GOLDEN, render


def d(name):
    return str(DATA / name)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden_outputs(name):
    code, out = render(CASES[name])
    assert code == 0
    assert out == (GOLDEN / name).read_text(encoding="utf-8")


@pytest.mark.parametrize("name", ["cov_3x3_saturated.json", "power_3x3.json"])
def test_golden_outputs_with_numpy_backend(name):
    env = {**os.environ, "LOGBILINEAR_BACKEND": "numpy"}
    proc = subprocess.run(
        [sys.executable, "-m", "logbilinear.cli", *CASES[name]], env=env, capture_output=True, text=True, check=True
    )
    assert proc.stdout == (GOLDEN / name).read_text(encoding="utf-8")


def test_fit_values(capsys):
    code, out, _ = run(["fit", "--table", d("table_2x2.csv"), "--design", d("design_2x2.json")], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["schema_version"] == 1
    assert abs(doc["theta_hat"][0][0] - np.log(2 / 3)) < 1e-11
    assert abs(doc["variance"][0][0] - 0.208333333333) < 1e-11


def test_cov_all_representations(capsys):
    code, out, _ = run(
        ["cov", "--table", d("table_3x3.csv"), "--design", d("design_3x3_saturated.json"), "--all-representations"],
        capsys,
    )
    doc = json.loads(out)
    assert code == 0
    assert set(doc["representations"]) == {"projection", "explicit", "mr", "kron", "score"}
    assert doc["routes_agree"] and doc["max_pairwise_deviation_bound"] < 1e-8


def test_power_matches_library(capsys):
    argv = [
        "power", "--design", d("design_3x3.json"), "--theta-prime", d("theta_prime_3x3.json"),
        "--marginals", d("marginals_3x3.json"), "--scheme", "MC", "--n", "321",
    ]
    code, out, _ = run(argv, capsys)
    spec = DesignSpec([[1.0], [2.0]], [[1.0], [2.0]])
    req = PowerRequest([[0.25]], [0.3, 0.4, 0.3], [0.25, 0.35, 0.4], "MC", [0.4, 0.3, 0.3], 321)
    expected = power_at(req, HypothesisSpec([[1.0]]), build_model_matrices(spec), spec)
    assert code == 0
    assert abs(json.loads(out)["power"] - expected) < 1e-11


def test_power_curve_and_samplesize(capsys):
    base = [
        "--design", d("design_2x2.json"), "--theta-prime", d("theta_prime_2x2.json"),
        "--marginals", d("marginals_2x2.json"),
    ]
    code, out, _ = run(["power", *base, "--curve", "50,100,200"], capsys)
    curve = json.loads(out)["curve"]
    assert code == 0 and [c["n"] for c in curve] == [50, 100, 200]
    assert curve[0]["power"] < curve[1]["power"] < curve[2]["power"]
    code, out, _ = run(["samplesize", *base, "--target-power", "0.8"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["power_at_n"] >= 0.8 > doc["power_below_n"]


def test_csv_output_has_header(capsys):
    code, out, _ = run(["fit", "--table", d("table_2x2.csv"), "--design", d("design_2x2.json"), "--format", "csv"], capsys)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "name,value" and "schema_version,1" in lines


def test_output_file_and_env_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("LOGBILINEAR_OUTPUT_DIR", str(tmp_path))
    code, out, _ = run(["fit", "--table", d("table_2x2.csv"), "--design", d("design_2x2.json"), "-o", "sub/fit.json"], capsys)
    assert code == 0 and out == ""
    assert json.loads((tmp_path / "sub" / "fit.json").read_text())["command"] == "fit"


def test_reference_flag_permutes_labels(capsys):
    base = ["fit", "--table", d("table_3x3.csv"), "--design", d("design_3x3_saturated.json")]
    code, out, err = run(base + ["--reference", "many,high"], capsys)
    # relative scores cannot follow a new reference
    assert code == 1 and "reference" in err
    code, out, _ = run(["fit", "--table", d("table_3x3.csv"), "--design", d("design_3x3.json"), "--reference", "many,high"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["row_labels"][0] == "many" and doc["col_labels"][0] == "high"
    code, out, _ = run(["fit", "--table", d("table_3x3.csv"), "--design", d("design_3x3.json")], capsys)
    # reversing the order of a linear score flips both signs, leaving θ unchanged
    assert abs(json.loads(out)["theta_hat"][0][0] - doc["theta_hat"][0][0]) < 1e-9
    code, _, _ = run(base + ["--reference", "nope,high"], capsys)
    assert code == 2


def test_domain_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "neg.csv"
    bad.write_text(",a,b\nr,1,-2\ns,3,4\n")
    code, out, err = run(["fit", "--table", str(bad), "--design", d("design_2x2.json")], capsys)
    assert code == 1
    assert "cell (0, 1)" in err
    assert json.loads(out)["error"]["type"] == "DomainError"
    code, out, _ = run(["fit", "--table", str(bad), "--design", d("design_2x2.json"), "--format", "csv"], capsys)
    assert code == 1 and out == ""


def test_convergence_error_exit_code(tmp_path, capsys):
    t = tmp_path / "zero.csv"
    t.write_text(",a,b\nr,0,5\ns,5,5\n")
    code, out, _ = run(["fit", "--table", str(t), "--design", d("design_2x2.json")], capsys)
    assert code == 1 and json.loads(out)["error"]["type"] == "ConvergenceError"


def test_usage_errors(capsys):
    assert run(["fit", "--table", d("table_2x2.csv")], capsys)[0] == 2
    assert run(["nonsense"], capsys)[0] == 2
    assert run(["fit", "--table", "/no/such.csv", "--design", d("design_2x2.json")], capsys)[0] == 2
    assert run(["power", "--design", d("design_2x2.json"), "--theta-prime", d("theta_prime_2x2.json"),
                "--marginals", d("marginals_2x2.json")], capsys)[0] == 2


def test_malformed_inputs(tmp_path, capsys):
    nov = tmp_path / "d.json"
    nov.write_text('{"model": "saturated", "shape": [2, 2]}')
    code, _, err = run(["fit", "--table", d("table_2x2.csv"), "--design", str(nov)], capsys)
    assert code == 1 and "schema_version" in err
    broken = tmp_path / "b.json"
    broken.write_text("{not json")
    assert run(["fit", "--table", d("table_2x2.csv"), "--design", str(broken)], capsys)[0] == 1
    ragged = tmp_path / "r.csv"
    ragged.write_text(",a,b\nr,1\ns,3,4\n")
    assert run(["fit", "--table", str(ragged), "--design", d("design_2x2.json")], capsys)[0] == 1


def test_check_command(tmp_path, capsys):
    code, out, _ = run(["check", "--table", d("table_2x2.csv"), "--design", d("design_2x2.json"),
                        "--theta-prime", d("theta_prime_2x2.json"), "--marginals", d("marginals_2x2.json"),
                        "--q", d("q_2x2.json")], capsys)
    assert code == 0 and json.loads(out)["passed"]
    rank_def = tmp_path / "rank.json"
    rank_def.write_text('{"schema_version": 1, "xtilde": [[1, 2], [2, 4]], "ytilde": [[1, 0], [0, 1]]}')
    code, out, _ = run(["check", "--table", d("table_3x3.csv"), "--design", str(rank_def)], capsys)
    doc = json.loads(out)
    assert code == 1
    assert "xtilde" in [c for c in doc["checks"] if c["name"] == "design"][0]["message"]
    neg = tmp_path / "neg.csv"
    neg.write_text(",a,b\nr,1,-2\ns,3,4\n")
    code, out, _ = run(["check", "--table", str(neg)], capsys)
    assert code == 1 and "cell (0, 1)" in json.loads(out)["checks"][0]["message"]
    assert run(["check"], capsys)[0] == 2


def test_bridge_command(capsys):
    code, out, _ = run(["bridge", "linear", "--beta", "[0.5]", "--sigma-y2", "1", "--cov-x", "[[1]]"], capsys)
    assert code == 0 and abs(json.loads(out)["theta"][0] - 2 / 3) < 1e-12
    code, out, _ = run(["bridge", "linear-inverse", "--theta", "[0.6666666666666666]", "--sigma-y2", "1", "--cov-x", "1"], capsys)
    assert code == 0 and abs(json.loads(out)["beta"][0] - 0.5) < 1e-12
    code, out, _ = run(["bridge", "mvlinear", "--beta", "[[0.5]]", "--cov-y", "[[1]]", "--cov-x", "[[1]]"], capsys)
    assert code == 0 and abs(json.loads(out)["theta"][0][0] - 2 / 3) < 1e-12
    code, out, _ = run(["bridge", "loglinear", "--theta", "[1.5, -2]"], capsys)
    assert json.loads(out)["beta"] == [1.5, -2.0]
    assert run(["bridge", "linear", "--beta", "[2]", "--sigma-y2", "1", "--cov-x", "1"], capsys)[0] == 1
    assert run(["bridge", "linear", "--beta", "oops", "--sigma-y2", "1", "--cov-x", "1"], capsys)[0] == 2


def test_simulate_command(tmp_path, capsys):
    argv = [
        "simulate", "--design", d("design_2x2.json"), "--theta-prime", d("theta_prime_2x2.json"),
        "--marginals", d("marginals_2x2.json"), "--scheme", "MR", "--n", "400", "--replications", "50",
        "--seed", "7", "--dump-theta", str(tmp_path / "draws.csv"),
    ]
    code, out, _ = run(argv, capsys)
    doc = json.loads(out)
    assert code == 0 and doc["n_success"] == 50
    assert doc["scheme"]["row_sizes"] == [200.0, 200.0]
    lines = (tmp_path / "draws.csv").read_text().splitlines()
    assert lines[0] == "theta_0" and len(lines) == 51
    code, out2, _ = run(argv, capsys)
    assert out2 == out
