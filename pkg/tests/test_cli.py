import csv
import json
import math
import subprocess
import sys
import xml.etree.ElementTree as ET
from importlib import resources

import jsonschema
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lognodal import cli


def schema(name):
    return json.loads(resources.files("lognodal").joinpath("schemas", name).read_text())


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def solved2(tmp_path_factory):
    out = tmp_path_factory.mktemp("k2")
    rc = run("solve", "--k", 2, "--out", out, "--plot")
    return rc, out


def test_solve_writes_profile_summary_plot(solved2):
    rc, out = solved2
    assert rc == 0
    with open(out / "solution.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "u", "du"]
    assert all(len(r) == 3 for r in rows[1:])
    summary = json.loads((out / "summary.json").read_text())
    jsonschema.validate(summary, schema("summary.schema.json"))
    assert summary["k"] == 2 and len(summary["node_radii"]) == 1
    assert summary["energy"] == pytest.approx(2110.4997413119, rel=1e-10)
    root = ET.parse(out / "solution.svg").getroot()
    assert root.tag.endswith("svg")
    # one red rule per node
    lines = [e for e in root.iter() if e.tag.endswith("line") and "cc3333" in e.get("style", "")]
    assert len(lines) == 1


def test_profile_values_beyond_double_range(solved2):
    # near the centre of the two-domain solution u ~ 1e50; values are written
    # exactly, and also where they would overflow a double
    _, out = solved2
    with open(out / "solution.csv") as fh:
        rows = list(csv.reader(fh))[1:]
    assert all(r[1] not in ("inf", "-inf", "nan") for r in rows)
    assert float(rows[0][1]) > 1e40


def test_negative_ground_state(tmp_path):
    assert run("solve", "--k", 1, "--sign", "-", "--out", tmp_path) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["sign"] == -1 and s["u0"] < 0


def test_json_format(tmp_path):
    assert run("solve", "--format", "json", "--out", tmp_path) == 0
    prof = json.loads((tmp_path / "solution.json").read_text())
    assert set(prof) == {"r", "u", "du"} and len(prof["r"]) == len(prof["u"])
    assert not (tmp_path / "solution.csv").exists()


def test_bit_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("solve", "--out", a, "--plot") == 0
    assert run("solve", "--out", b, "--plot") == 0
    for name in ("solution.csv", "summary.json", "solution.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_plot_does_not_change_numbers(tmp_path):
    assert run("solve", "--out", tmp_path / "p", "--plot") == 0
    assert run("solve", "--out", tmp_path / "q") == 0
    assert (tmp_path / "p" / "solution.csv").read_bytes() == \
        (tmp_path / "q" / "solution.csv").read_bytes()


@pytest.mark.parametrize("content", ['{"theta": -1}', '{"bogus": 1}', "[1, 2]", "{not json",
                                     '{"k": "two"}', '{"sign": 0}', '{"N": 6, "p": 9.0}'])
def test_malformed_config(tmp_path, content):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(content)
    out = tmp_path / "out"
    assert run("solve", "--config", cfg, "--out", out) == 1
    assert not out.exists() or not any(out.iterdir())


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"theta": 2.0, "k": 1}))
    assert run("solve", "--config", cfg, "--theta", 1.0, "--out", tmp_path / "o") == 0
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["params"]["theta"] == 1.0


def test_unknown_check():
    assert run("verify", "nonsense") == 1


def test_bad_flag_is_usage_error():
    assert run("solve", "--k", "x") == 1


def test_empty_sweep(tmp_path):
    assert run("sweep", "--axis", "theta", "--out", tmp_path) == 1
    assert not any(tmp_path.iterdir())


def test_eps_sweep(tmp_path):
    assert run("sweep", "--axis", "eps", "--quantity", "log_moment",
               "--values", "0.001,0.002,0.004", "--out", tmp_path, "--plot") == 0
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["axis", "value", "status"]
    assert [r[2] for r in rows[1:]] == ["ok"] * 3
    assert all(float(r[1]) > 0 for r in rows[1:])
    ET.parse(tmp_path / "sweep.svg")


def test_sweep_records_failures(tmp_path):
    # theta = -1 is outside the model; the point fails and is kept as nan
    assert run("sweep", "--axis", "theta", "--quantity", "level", "--values=-1,1",
               "--out", tmp_path) == 2
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.reader(fh))[1:]
    assert rows[0][1] == "nan" and rows[0][2] != "ok"
    assert rows[1][2] == "ok"


def test_verify_bubbles_report(tmp_path):
    assert run("verify", "bubbles", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(rep, schema("report.schema.json"))
    names = {s["name"] for s in rep["subchecks"]}
    assert {"exponent_grad_sq_defect", "exponent_l2_norm", "log_moment_coefficient"} <= names
    assert rep["passed"]


def test_solver_failure_dumps_scan(tmp_path):
    assert run("solve", "--k", 3, "--out", tmp_path) == 2
    with open(tmp_path / "scan.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["tau", "log_abs_u0", "interior_zeros", "y_R", "reason"]
    assert len(rows) > 10


def test_exploratory_banner(tmp_path, capsys):
    assert run("solve", "--N", 5, "--out", tmp_path) == 0
    assert "exploratory" in capsys.readouterr().err


def test_env_tolerance(tmp_path, monkeypatch):
    monkeypatch.setenv("LOGNODAL_TOL", "1e-10")
    assert run("solve", "--out", tmp_path) == 0
    assert json.loads((tmp_path / "summary.json").read_text())["rtol"] == 1e-10


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(-5, 5), theta=st.floats(0.01, 5), k=st.integers(1, 6),
       sign=st.sampled_from([1, -1]), fmt=st.sampled_from(["csv", "json"]),
       values=st.lists(st.floats(-10, 10), max_size=4), seed=st.integers(0, 2 ** 31))
def test_config_round_trip(lam, theta, k, sign, fmt, values, seed):
    cfg = cli.RunConfig(lam=lam, theta=theta, k=k, sign=sign, format=fmt, values=values, seed=seed)
    d = cfg.to_dict()
    jsonschema.validate(d, schema("config.schema.json"))
    back = cli.RunConfig.from_dict(json.loads(json.dumps(d)))
    assert back == cfg


def test_fmt_log_beyond_double():
    assert cli.fmt_log(1.0, 0.0) == "1.0"
    s = cli.fmt_log(-1.0, 1000.0 * math.log(10.0))
    assert s == "-1.00000000000e+1000"
    assert cli.fmt_log(1.0, 800.0) == "2.72637457211e+347"
    assert cli.fmt_log(0.0, 5.0) == "0"


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "lognodal.cli", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "solve" in r.stdout
