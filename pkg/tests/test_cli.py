import csv
import json

import pytest

from ordfem.cli import main, parse_config, UsageError


def _run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def test_convergence_csv(tmp_path):
    code, out = _run(tmp_path, "rates.csv", "convergence", "--problem", "bilaplacian", "--n", "2,4", "--format", "csv")
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["n", "h", "dof_u", "dof_phi", "dof_zeta", "err_u_h1", "err_phi_h1", "err_zeta_ref", "rate"]
    assert [r[0] for r in rows[1:]] == ["2", "4"]
    assert rows[1][-1] == "" and float(rows[2][-1]) > 0


def test_convergence_json_quadcurl(tmp_path):
    code, out = _run(tmp_path, "r.json", "convergence", "--problem", "quadcurl", "--n", "2,4", "--format", "json")
    assert code == 0
    data = json.loads(out.read_text())
    assert data["schema"] == "ordfem/1" and data["problem"] == "quadcurl"
    assert data["columns"][4] == "dof_sigma"


def test_infsup_json(tmp_path):
    code, out = _run(tmp_path, "b.json", "infsup", "--pair", "curl", "--n", "2,3")
    assert code == 0
    data = json.loads(out.read_text())
    assert data["pair"] == "curl" and len(data["betas"]) == 2 and data["drift"] >= 0


@pytest.mark.parametrize("argv", [["convergence", "--n", "1,2"], ["infsup", "--n", "x"], ["infsup", "--pair", "grad"],
                                  ["convergence", "--n", "2,3"], ["nope"], ["convergence", "--coefficient", "-1"],
                                  ["convergence", "--n", "4,2"], ["infsup", "--format", "xml"]])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "usage error" in capsys.readouterr().err


def test_unwritable_output(capsys):
    assert main(["infsup", "--out", "/nonexistent/dir/x.json"]) == 1


def test_check_exit_2(tmp_path, capsys):
    # n = 2, 4 is pre-asymptotic for the bi-Laplacian: the fitted u rate is below 0.7
    code, _ = _run(tmp_path, "c.csv", "convergence", "--n", "2,4", "--check")
    assert code == 2
    assert "check failed" in capsys.readouterr().err


def test_check_passes(tmp_path):
    code, _ = _run(tmp_path, "d.json", "decomposition", "--pair", "curl", "--n", "2,3", "--samples", "20", "--check")
    assert code == 0


def test_hypotheses_csv(tmp_path):
    code, out = _run(tmp_path, "h.csv", "hypotheses", "--problem", "quadcurl", "--format", "csv")
    assert code == 0
    assert out.read_text().splitlines()[0] == "n,B_bound,interp_bound,coercivity,kernel_dim"


def test_deterministic_bytes(tmp_path):
    a = _run(tmp_path, "a.json", "decomposition", "--n", "2,3", "--samples", "10", "--seed", "7")[1].read_bytes()
    b = _run(tmp_path, "b.json", "decomposition", "--n", "2,3", "--samples", "10", "--seed", "7")[1].read_bytes()
    assert a == b


def test_config_defaults():
    cfg = parse_config(["hypotheses"])
    assert cfg.n == (2, 3) and cfg.fmt == "json"
    cfg = parse_config(["convergence", "--coefficient", "smooth"])
    assert cfg.n == (2, 4, 8) and cfg.fmt == "csv" and cfg.coefficient == "smooth"
    with pytest.raises(UsageError):
        parse_config(["infsup", "--quad-degree", "12"])


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("ORDFEM_THREADS", "1")
    assert _run(tmp_path, "t.json", "infsup", "--n", "2,3")[0] == 0
    monkeypatch.setenv("ORDFEM_THREADS", "many")
    assert main(["infsup"]) == 1
