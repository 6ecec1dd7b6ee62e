import csv
import json
import math

import pytest

from blocklevy.cli import main
from blocklevy.experiment import CSV_COLUMNS, ConfigError, ExperimentSpec, parse_config, run_experiment
from blocklevy.moment_flow import GeneratorSystem

MINIMAL = """
[experiment]
kinds = so
n = 1
m = 2
t = 0.5
tables = tr(u[1,1])
nsamples = 64
seed = 3
"""


def _last_value(out: str) -> float:
    return float(out.strip().splitlines()[-1].split()[-1])


def test_flow_closed_form(capsys):
    assert main(["flow", "--n", "1", "--table", "tr(u[1,1] u[1,1])", "--t", "1"]) == 0
    assert abs(_last_value(capsys.readouterr().out)) <= 1e-12
    assert main(["flow", "--n", "1", "--table", "tr(u[1,1])", "--t", "0"]) == 0
    assert _last_value(capsys.readouterr().out) == 1.0
    assert main(["flow", "--n", "1", "--table", "tr(u[1,1])", "--t", "2"]) == 0
    assert _last_value(capsys.readouterr().out) == pytest.approx(math.exp(-1), rel=1e-12)


def test_flow_dump(tmp_path, capsys):
    dump = tmp_path / "b0.txt"
    assert main(["flow", "--n", "2", "--table", "tr(u[1,2] u[2,1])", "--t", "1", "--dump", str(dump), "-v"]) == 0
    system = GeneratorSystem.from_text(dump.read_text())
    assert system.dimension >= 2
    assert "[0]" in capsys.readouterr().out


def test_check_cov_passes(capsys):
    assert main(["check-cov", "--kind", "so", "--m", "4"]) == 0
    out = capsys.readouterr().out
    assert out.count("\n") == 15 and "FAIL" not in out


def test_simulate_exit_status(capsys):
    assert main(["simulate", "--kind", "sp", "--n", "2", "--m", "2", "--tol", "1e-9"]) == 0
    assert main(["simulate", "--kind", "so", "--m", "3", "--scheme", "euler", "--tol", "1e-9"]) == 1
    err = capsys.readouterr().err
    assert json.loads(err.strip().splitlines()[-1])["status"] == "fail"


def test_eval(capsys):
    assert main(["eval", "--n", "2", "--m", "3", "--table", "tr(u[1,1] u[2,2])"]) == 0
    assert _last_value(capsys.readouterr().out) == 1.0
    assert main(["eval", "--kind", "u", "--n", "2", "--m", "2", "--t", "0.5", "--table", "tr(u[1,2])"]) == 0
    assert main(["eval", "--table", "tr()"]) == 2
    assert "position 3" in capsys.readouterr().err


def test_run_minimal_spec_and_determinism(tmp_path, capsys):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(MINIMAL)
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", str(cfg), "--output", str(out1)]) == 0
    assert main(["run", str(cfg), "--output", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = list(csv.reader(out1.open()))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 2
    assert rows[1][:5] == ["so", "1", "2", "0.5", "tr(u[1,1])"]
    assert float(rows[1][8]) == pytest.approx(math.exp(-0.25))
    meta = json.loads(out1.with_suffix(".json").read_text())
    assert meta["basis_size"] == 1 and meta["workers"] == 1 and meta["spec"]["seed"] == 3
    assert meta["solver"][0]["max_rel_gap"] < 1e-9


def test_sweep_to_stdout(capsys):
    assert main(["sweep", "--kinds", "so,sp", "--n", "1", "--m", "2,3", "--table", "tr(u[1,1])",
                 "--nsamples", "20", "--t", "0.2"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert len(rows) == 5 and [r[0] for r in rows[1:]] == ["so", "so", "sp", "sp"]


@pytest.mark.parametrize("replace,key", [
    ("kinds = so", "experiment.kinds"),
    ("n = 1", "experiment.n"),
    ("seed = 3", "experiment.seed"),
    ("tables = tr(u[1,1])", "experiment.tables"),
    ("m = 2", "experiment.m"),
])
def test_config_errors_name_the_key(replace, key, tmp_path, capsys):
    bad = {"kinds = so": "kinds = so, gl", "n = 1": "n = one", "seed = 3": "", "tables = tr(u[1,1])":
           "tables = tr(u[1,2])", "m = 2": "m = 0"}[replace]
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace(replace, bad))
    assert info.value.key == key
    cfg = tmp_path / "bad.ini"
    cfg.write_text(MINIMAL.replace(replace, bad))
    assert main(["run", str(cfg), "--output", str(tmp_path / "x.csv")]) == 2
    assert key in capsys.readouterr().err


def test_unknown_key_and_section():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "colour = blue\n")
    assert info.value.key == "experiment.colour"
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "[other]\nx = 1\n")


def test_spec_canonicalizes_tables(tmp_path):
    spec = ExperimentSpec(kinds=["SP"], n=2, m_list=[2], t_list=[0.0], tables=["tr(u[2,1] u[1,2])"], nsamples=5,
                          seed=0, output=str(tmp_path / "r.csv"))
    assert spec.tables == ["tr(u[1,2] u[2,1])"] and spec.kinds == ["sp"]
    res = run_experiment(spec)
    assert res.rows[0][5] == "0.0"
