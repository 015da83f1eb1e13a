import csv
import io as stdio
import json
import math
import shutil
import subprocess

import numpy as np
import pytest
from hypothesis import given

from conftest import joints
from privguess import core, io
from privguess.cli import main
from privguess.errors import ValidationError


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    return list(csv.DictReader(stdio.StringIO(text)))


# -- serialization ----------------------------------------------------------


def test_fmt():
    assert io.fmt(None) == ""
    assert io.fmt(True) == "true"
    assert io.fmt(3) == "3"
    assert io.fmt(1 / 3) == "0.333333333333"
    assert io.fmt(-0.0) == "0"
    assert io.fmt(math.inf) == "inf" and io.fmt(math.nan) == "nan"


def test_csv_layout():
    text = io.rows_to_csv(("a", "b"), [{"a": 1.0, "b": None}, {"a": 0.5}])
    assert text == "a,b\n1,\n0.5,\n"


def test_json_layout():
    text = io.rows_to_json({"z": 1, "a": math.inf}, [{"epsilon": 0.5, "filter": core.identity(2)}])
    doc = json.loads(text)
    assert doc["meta"] == {"a": None, "z": 1}
    assert doc["points"][0]["filter"] == [[1.0, 0.0], [0.0, 1.0]]
    assert text.index('"meta"') < text.index('"points"')


@given(joints(max_m=4, max_n=4))
def test_joint_round_trips(joint):
    assert np.array_equal(io.joint_from_json(io.joint_to_json(joint)).probs, joint.probs)
    back = io.joint_from_csv(io.joint_to_csv(joint))
    assert np.abs(back.probs[: joint.M, : joint.N] - joint.probs).max() < 1e-11


def test_joint_loading_errors(tmp_path):
    with pytest.raises(ValidationError):
        io.joint_from_csv("a,b\n1,2\n")
    with pytest.raises(ValidationError):
        io.joint_from_csv("x,y,p\n0,0,oops\n")
    with pytest.raises(ValidationError):
        io.joint_from_json("{")
    with pytest.raises(ValidationError):
        io.load_joint(tmp_path / "missing.csv")
    path = tmp_path / "j.json"
    path.write_text(json.dumps([[0.4, 0.1], [0.1, 0.4]]))
    assert io.load_joint(path).N == 2


def test_channel_round_trip():
    ch = core.bibo(0.1, 0.3)
    assert np.array_equal(io.channel_from_json(io.channel_to_json(ch)).rows, ch.rows)


# -- commands ---------------------------------------------------------------


def test_scalar_grid(capsys):
    code, out, _ = run(["scalar", "--p", "0.6", "--alpha", "0.2", "--beta", "0.2", "--eps-grid", "0.6:0.8:21"], capsys)
    assert code == 0
    rows = rows_of(out)
    assert len(rows) == 21
    assert list(rows[0]) == ["epsilon", "utility", "regime", "filter_param"]
    assert math.isclose(float(rows[0]["utility"]), 0.72, abs_tol=1e-12)
    assert float(rows[-1]["utility"]) == 1.0
    assert all(r["regime"] == "z" for r in rows)
    util = [float(r["utility"]) for r in rows]
    assert np.all(np.diff(util) >= 0)


def test_scalar_json_meta(capsys):
    code, out, _ = run(["scalar", "--p", "0.6", "--alpha", "0.2", "--beta", "0.2", "--eps", "0.7",
                        "--format", "json"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["meta"]["config"]["p"] == 0.6 and doc["meta"]["config"]["command"] == "scalar"
    pt = doc["points"][0]
    assert math.isclose(pt["utility"], 0.86) and pt["achieved"] is True
    joint = core.JointPmf.from_prior_and_channel([0.4, 0.6], core.bsc(0.2))
    pair = core.evaluate_filter(joint, core.Channel(pt["filter"]))
    assert math.isclose(pair.utility, 0.86, abs_tol=1e-12)


def test_scalar_with_joint_file(tmp_path, capsys):
    joint = core.JointPmf.from_prior_and_channel([0.4, 0.6], core.bsc(0.2))
    path = tmp_path / "joint.csv"
    path.write_text(io.joint_to_csv(joint))
    code, out, _ = run(["scalar", "--joint", str(path), "--eps", "0.75"], capsys)
    assert code == 0
    row = rows_of(out)[0]
    assert math.isclose(float(row["utility"]), 0.93) and row["regime"] == "nary_z"


def test_verify_report(tmp_path, capsys):
    out_path = tmp_path / "verify.csv"
    code, _, err = run(["verify", "--p", "0.6", "--alpha", "0.2", "--beta", "0.2", "--resolution", "512",
                        "--out", str(out_path)], capsys)
    assert code == 0
    rows = rows_of(out_path.read_text())
    assert max(float(r["abs_diff"]) for r in rows) < 2e-3
    assert "max |closed form - LP|" in err


def test_vector_iid_example(capsys):
    code, out, _ = run(["vector-iid", "--n", "10", "--p", "0.6", "--alpha", "0.2", "--eps", "0.75"], capsys)
    assert code == 0
    row = rows_of(out)[0]
    expected = (4.67162 * 0.75 ** 10 + 0.498388) ** 0.1
    assert abs(float(row["utility"]) - expected) < 1e-6
    assert row["regime"] == "uncertified" and row["n"] == "10"


def test_vector_iid_strict_exits_3(capsys):
    code, _, err = run(["vector-iid", "--n", "10", "--p", "0.6", "--alpha", "0.2", "--eps", "0.75", "--strict"],
                       capsys)
    assert code == 3 and "outside certified regime" in err


def test_vector_iid_certified_and_memoryless(capsys):
    code, out, _ = run(["vector-iid", "--n", "2", "--p", "0.6", "--alpha", "0.2", "--eps", "0.78"], capsys)
    row = rows_of(out)[0]
    assert code == 0 and row["regime"] == "nary_z"
    assert math.isclose(float(row["utility"]) ** 2, 1.4 * 0.78 ** 2 + 0.104, abs_tol=1e-10)
    code, out, _ = run(["vector-iid", "--n", "2", "--p", "0.6", "--alpha", "0.2", "--eps", "0.7", "--memoryless"],
                       capsys)
    assert math.isclose(float(rows_of(out)[0]["utility"]), 0.86, abs_tol=1e-12)


def test_markov_and_parametric(capsys):
    code, out, _ = run(["vector-markov", "--n", "3", "--p", "0.6", "--alpha", "0.2", "--r", "0.05",
                        "--eps", "0.92"], capsys)
    row = rows_of(out)[0]
    assert code == 0 and float(row["utility"]) < float(row["upper"])
    code, _, err = run(["vector-markov", "--n", "3", "--p", "0.6", "--alpha", "0.2", "--r", "0.3",
                        "--eps", "0.92"], capsys)
    assert code == 3 and "hypothesis" in err
    code, out, _ = run(["parametric", "--n", "3", "--p", "0.6", "--alpha", "0.2", "--num-points", "5"], capsys)
    assert code == 0 and len(rows_of(out)) == 5


def test_oracle_command(capsys):
    code, out, _ = run(["oracle", "--p", "0.6", "--alpha", "0.2", "--beta", "0.2", "--eps", "0.7",
                        "--budget", "200", "--seed", "1"], capsys)
    rows = rows_of(out)
    assert code == 0 and [r["source"] for r in rows] == ["lp", "search"]
    assert math.isclose(float(rows[0]["utility"]), 0.86, abs_tol=1e-9)
    assert float(rows[1]["utility"]) <= float(rows[0]["utility"]) + 1e-9


def test_gaussian_command(capsys):
    code, out, _ = run(["gaussian", "--rho", "0.8", "--eps-grid", "0:0.64:5"], capsys)
    rows = rows_of(out)
    assert code == 0 and list(rows[0]) == ["epsilon", "sensr", "gamma_eps", "lower", "upper"]
    assert math.isclose(float(rows[2]["sensr"]), 0.5)
    assert rows[-1]["gamma_eps"] == "inf"


def test_iid_gap_directory(tmp_path, capsys):
    code, out, _ = run(["iid-gap", "--out", str(tmp_path)], capsys)
    assert code == 0
    fits = {r["curve"]: r for r in rows_of((tmp_path / "fit.csv").read_text())}
    assert math.isclose(float(fits["memoryless"]["slope"]), 1.4, abs_tol=1e-9)
    assert math.isclose(float(fits["restricted_n2"]["intercept"]), 0.104, abs_tol=1e-9)
    assert math.isclose(float(fits["restricted_n10"]["slope"]), 4.6716, rel_tol=1e-3)
    mem = rows_of((tmp_path / "memoryless.csv").read_text())
    two = rows_of((tmp_path / "restricted_n2.csv").read_text())
    ten = rows_of((tmp_path / "restricted_n10.csv").read_text())
    for a, b, c in zip(mem, two, ten):
        if c["certified"] == "true":
            assert float(c["utility"]) >= float(b["utility"]) - 1e-12 >= float(a["utility"]) - 2e-12


# -- errors, config, determinism ---------------------------------------------


@pytest.mark.parametrize("argv, code", [
    (["scalar", "--p", "1.2", "--alpha", "0.2", "--beta", "0.2"], 2),
    (["scalar", "--p", "0.6", "--alpha", "0.2"], 2),
    (["scalar", "--p", "0.6", "--alpha", "0.2", "--beta", "0.2", "--eps", "0.9"], 2),
    (["scalar", "--p", "0.6", "--alpha", "0.2", "--beta", "0.2", "--eps-grid", "0.8:0.6:3"], 2),
    (["vector-markov", "--n", "2", "--p", "0.6", "--alpha", "0.2", "--r", "0"], 2),
    (["iid-gap"], 2),
])
def test_exit_codes(argv, code, capsys):
    got, _, err = run(argv, capsys)
    assert got == code and err.startswith("privguess:")


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('p = 0.6\nalpha = 0.2\nbeta = 0.2\neps = 0.65\nformat = "json"\n')
    _, out, _ = run(["scalar", "--config", str(cfg)], capsys)
    assert json.loads(out)["points"][0]["epsilon"] == 0.65
    _, out, _ = run(["scalar", "--config", str(cfg), "--eps", "0.7", "--format", "csv"], capsys)
    assert rows_of(out)[0]["epsilon"] == "0.7"


def test_config_errors(tmp_path, capsys):
    bad_type = tmp_path / "a.toml"
    bad_type.write_text('p = "high"\n')
    assert run(["scalar", "--config", str(bad_type)], capsys)[0] == 2
    unknown = tmp_path / "b.toml"
    unknown.write_text("gamma = 1.0\n")
    assert run(["scalar", "--config", str(unknown)], capsys)[0] == 2
    assert run(["scalar", "--config", str(tmp_path / "none.toml")], capsys)[0] == 2


def test_reruns_are_byte_identical(tmp_path, capsys):
    argv = ["oracle", "--p", "0.6", "--alpha", "0.2", "--beta", "0.2", "--num-points", "5",
            "--budget", "100", "--seed", "3", "--format", "json"]
    out = tmp_path / "run.json"
    assert run(argv + ["--out", str(out)], capsys)[0] == 0
    first = out.read_bytes()
    assert run(argv + ["--out", str(out)], capsys)[0] == 0
    assert out.read_bytes() == first
    assert b"\r\n" not in first


@pytest.mark.skipif(shutil.which("privguess") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["privguess", "scalar", "--p", "0.6", "--alpha", "0.2", "--beta", "0.2", "--eps", "0.8"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert rows_of(proc.stdout)[0]["utility"] == "1"
