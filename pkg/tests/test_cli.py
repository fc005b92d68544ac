import json
import subprocess
import sys

import pytest

from tswlad.cli import main
from tswlad.experiment import table1_config


def write_config(tmp_path, changes=None):
    d = table1_config(0.1, n_seeds=1, horizon=200).to_dict()
    for (block, key), value in (changes or {}).items():
        d[block][key] = value
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(d))
    return p


def test_validate_ok(tmp_path, capsys):
    assert main(["validate", "--config", str(write_config(tmp_path))]) == 0
    assert capsys.readouterr().out.startswith("ok:")


def test_validate_config_error(tmp_path, capsys):
    p = write_config(tmp_path, {("estimator", "mu_bar"): -1})
    assert main(["validate", "--config", str(p)]) == 2
    assert "mu_bar" in capsys.readouterr().err
    assert main(["validate", "--config", str(tmp_path / "nope.json")]) == 2


def test_run_config(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(write_config(tmp_path)), "--out", str(out), "--algo", "tswlad",
                 "--seeds", "2"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert set(summary["aggregates"]) == {"tswlad"}
    assert (out / "tswlad_seed1.csv").exists() and not (out / "l2-baseline_seed0.csv").exists()


def test_dataset_check(tmp_path, capsys):
    p = tmp_path / "d.csv"
    p.write_text("phi_0,y,L,l,u,U\n1,3,0,0,25,25\n")
    assert main(["dataset", "check", str(p)]) == 0
    assert "1 rows, d=1" in capsys.readouterr().out
    p.write_text("phi_0,y,L,l,u,U\n1,3,0,0,25,25\n1,-3,0,0,25,25\n")
    assert main(["dataset", "check", str(p)]) == 3
    assert "d.csv:3" in capsys.readouterr().err


def test_numerical_error_exit_code(tmp_path, monkeypatch, capsys):
    from tswlad import cli
    from tswlad.errors import NumericalError

    def boom(*a, **k):
        raise NumericalError("diverged")

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert main(["run", "--config", str(write_config(tmp_path))]) == 4
    assert "diverged" in capsys.readouterr().err


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "tswlad", "validate", "--config", str(write_config(tmp_path))],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
