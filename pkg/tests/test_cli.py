from __future__ import annotations
import csv
import json

import numpy as np
import pytest

from src.cli import main


def write(tmp_path, data, name):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def unit_circle_problem(matrix):
    return {
        "n": 2,
        "matrices": [matrix],
        "constraints": [{"terms": [{"exponents": [2, 0], "coeff": 1.0}, {"exponents": [0, 2], "coeff": 1.0}]}],
        "state_box": {"x_min": [-1.0, -1.0], "x_max": [1.0, 1.0]},
    }


@pytest.fixture
def contraction(tmp_path, isolated_log):
    return write(tmp_path, unit_circle_problem([[0.5, 0.0], [0.0, 0.5]]), "contraction.json")


def test_help(capsys, isolated_log):
    assert main(["help"]) == 0
    assert "Exit codes" in capsys.readouterr().out


def test_bad_arguments(isolated_log):
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == 2


def test_parse_error_exit_code(tmp_path, isolated_log):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    assert main(["solve", str(path)]) == 2


def test_check_contraction(contraction, capsys):
    assert main(["check", contraction]) == 0
    out = capsys.readouterr().out
    assert "invariant" in out and "eps = 0.25" in out


def test_check_running_example(fixtures_dir, capsys, isolated_log):
    assert main(["check", str(fixtures_dir / "running_example.json")]) == 0
    assert "Invariance of the lifted constraint set: unknown" in capsys.readouterr().out


def test_gate_failure_exit_code(tmp_path, isolated_log):
    unstable = write(tmp_path, unit_circle_problem([[1.2, 0.0], [0.0, 0.3]]), "unstable.json")
    assert main(["check", unstable]) == 3
    assert main(["solve", unstable]) == 3


def test_box_validation_exit_code(tmp_path, isolated_log):
    data = unit_circle_problem([[0.5, 0.0], [0.0, 0.5]])
    data["state_box"] = {"x_min": [-0.5, -0.5], "x_max": [0.5, 0.5]}
    assert main(["solve", write(tmp_path, data, "small_box.json")]) == 8


def test_non_convergence_exit_code(fixtures_dir, tmp_path, isolated_log):
    out = str(tmp_path / "r.json")
    assert main(["solve", str(fixtures_dir / "example1.json"), "--max-iter", "2", "--output", out]) == 4


def test_lift(fixtures_dir, capsys, isolated_log):
    assert main(["lift", str(fixtures_dir / "running_example.json")]) == 0
    out = capsys.readouterr().out
    assert "L = [2], N = 3" in out
    assert "y2 = sqrt(2)*x1*x2" in out


def test_solve_grid_verify(contraction, tmp_path, capsys):
    result = str(tmp_path / "contraction.result.json")
    assert main(["solve", contraction, "--output", result]) == 0
    assert "converged after 1 iterations" in capsys.readouterr().out

    grid_csv = str(tmp_path / "grid.csv")
    assert main(["grid", result, "--grid-res", "11", "--output", grid_csv]) == 0
    with open(grid_csv, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 121
    assert sum(int(r["member"]) for r in rows) == 81
    svg = (tmp_path / "grid.svg").read_text(encoding="utf-8")
    assert svg.startswith("<svg") and 'class="inherited"' in svg

    assert main(["grid", result, "--grid-res", "1", "--output", grid_csv]) == 0
    with open(grid_csv, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and rows[0]["member"] == "1"

    assert main(["verify", result, "--problem", contraction, "--grid-res", "41", "--horizon", "4"]) == 0
    assert main(["verify", result, "--grid-res", "21", "--horizon", "0"]) == 0


def test_verify_mismatch(contraction, tmp_path, fixtures_dir, isolated_log):
    result = str(tmp_path / "r.json")
    assert main(["solve", contraction, "--output", result]) == 0
    assert main(["verify", result, "--problem", str(fixtures_dir / "example1.json")]) == 7


@pytest.mark.slow
def test_loosened_facet_is_reported(fixtures_dir, tmp_path, isolated_log):
    result = str(tmp_path / "example1.result.json")
    assert main(["solve", str(fixtures_dir / "example1.json"), "--output", result]) == 0
    assert main(["verify", result, "--grid-res", "150"]) == 0

    data = json.loads(open(result, encoding="utf-8").read())
    added = [p for p in data["polynomials"] if p["origin"] == "added" and p["kept"]]
    assert added
    for term in added[0]["terms"]:
        term["coeff"] /= 1.1
    loosened = write(tmp_path, data, "loosened.json")
    assert main(["verify", loosened, "--grid-res", "150"]) == 5


@pytest.mark.slow
@pytest.mark.parametrize("name,iterations", [("running_example.json", 7), ("example1.json", 5)])
def test_fixture_iterations(fixtures_dir, tmp_path, name, iterations, isolated_log):
    result = tmp_path / "out.json"
    assert main(["solve", str(fixtures_dir / name), "--output", str(result)]) == 0
    assert json.loads(result.read_text(encoding="utf-8"))["iterations"] == iterations


@pytest.mark.slow
def test_example2_disconnected_set(fixtures_dir, tmp_path, isolated_log):
    result = tmp_path / "example2.result.json"
    assert main(["solve", str(fixtures_dir / "example2.json"), "--output", str(result)]) == 0
    assert main(["verify", str(result), "--grid-res", "150", "--horizon", "10"]) == 0
    grid_csv = tmp_path / "example2.csv"
    assert main(["grid", str(result), "--grid-res", "150", "--output", str(grid_csv)]) == 0
    rows = np.loadtxt(grid_csv, delimiter=",", skiprows=1)
    assert rows[:, -1].sum() > 0
