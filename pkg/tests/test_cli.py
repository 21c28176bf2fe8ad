import json

import numpy as np
import pytest

from ma2scale.cli import main


def write(tmp_path, text, name="cfg.txt"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


SMOOTH = """# smooth benchmark on a small mesh
problem.benchmark = smooth
mesh.n = 16
init.type = prolong
"""


def test_solve_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["solve", "--config", write(tmp_path, SMOOTH), "--out", str(out)]) == 0
    for name in ("field.csv", "operator.csv", "signs.csv", "report.json"):
        assert (out / name).exists()
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] and report["discretely_convex"]
    assert report["N"] == 17**2
    assert report["linf_error"] < 2e-2
    header = (out / "signs.csv").read_text().splitlines()[0]
    assert header == "node,x,y,class,residual"


def test_solve_is_bit_identical(tmp_path):
    cfg = write(tmp_path, SMOOTH)
    for d in ("a", "b"):
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / d)]) == 0
    for name in ("field.csv", "operator.csv", "signs.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_expression_problem_with_perron(tmp_path):
    cfg = write(
        tmp_path,
        "problem.f = 1\nproblem.exact = norm2(x, y)/2\nmesh.n = 8\ndirections.D = 3\ndelta.value = 0.25\n",
    )
    out = tmp_path / "p"
    assert main(["solve", "--config", cfg, "--out", str(out), "--solver", "perron"]) == 0
    rows = np.loadtxt(out / "field.csv", delimiter=",", skiprows=1)
    assert rows.shape == (81, 4)
    assert json.loads((out / "report.json").read_text())["solver"] == "perron"


def test_mesh_dir_config(tmp_path):
    from ma2scale.mesh import build_unit_square_mesh

    build_unit_square_mesh(8).dump(tmp_path / "mesh")
    cfg = write(tmp_path, f"problem.benchmark = smooth\nmesh.dir = {tmp_path / 'mesh'}\ndirections.D = 4\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 0


@pytest.mark.parametrize(
    "text",
    [
        "problem.benchmark = nope\n",
        "problem.benchmark = smooth\nmesh.n = ten\n",
        "problem.benchmark = smooth\ndirections.D = 5\ndirections.theta = 0.3\n",
        "this line has no equals sign\n",
        "mesh.n = 8\n",
        "problem.f = log(x)\nproblem.g = 0\n",
        "problem.benchmark = smooth\ninit.type = magic\n",
    ],
)
def test_malformed_config_exit_1(tmp_path, text, capsys):
    assert main(["solve", "--config", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 1
    assert "error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "none.txt")]) == 1


def test_unknown_key_warns(tmp_path, caplog):
    cfg = write(tmp_path, "problem.benchmark = smooth\nmesh.n = 8\nfuture.key = 1\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert "future.key" in caplog.text


def test_nonconvergence_exit_2(tmp_path):
    cfg = write(tmp_path, "problem.benchmark = smooth\nmesh.n = 16\nsolver.max_iter = 1\n")
    out = tmp_path / "o"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 2
    assert json.loads((out / "report.json").read_text())["converged"] is False


def test_study_command(tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["study", "--benchmark", "smooth", "--levels", "1", "--out", str(out)]) == 0
    lines = (out / "table.csv").read_text().splitlines()
    assert len(lines) == 2
    assert lines[1].split(",")[1:3] == ["1089", "16"]
    assert main(["study", "--benchmark", "smooth", "--levels", "9"]) == 1


def test_check_command(capsys):
    assert main(["check", "--n", "4", "--seed", "7"]) == 0
    out = capsys.readouterr().out
    assert "violations=0" in out


def test_linear_data_needs_at_most_one_iteration(tmp_path):
    cfg = write(tmp_path, "problem.f = 0\nproblem.g = 2*x - y + 1\nmesh.n = 16\n")
    out = tmp_path / "o"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["iterations"] <= 1
    rows = np.loadtxt(out / "field.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(rows[:, 3], 2 * rows[:, 1] - rows[:, 2] + 1, atol=1e-12)


def test_smooth_n32_iteration_count(tmp_path):
    cfg = write(tmp_path, "problem.benchmark = smooth\nmesh.n = 32\n")
    out = tmp_path / "o"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert 6 <= report["iterations"] <= 10
    assert report["residual_history"][-1] <= 1e-8 * report["residual_history"][0]
