import json
import subprocess
import sys

from krslab.cli import main

POS_WITNESS = '{"n": 2, "mu": "1", "lambda": "0", "nu": "2"}'
MU_N1_WITNESS = '{"n": 2, "mu": "3", "lambda": "-1", "nu": "8/27"}'
FAMILY_M1 = '{"n": 2, "mu": "-1", "lambda": "-4", "nu": "-6"}'


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_classify(capsys):
    code, out, _ = run(capsys, "classify", POS_WITNESS)
    d = json.loads(out)
    assert code == 0 and d["classification"]["verdict"] == "nontrivial" and d["origin_defined"] is True
    code, out, _ = run(capsys, "classify", '{"n": 2, "mu": "1", "lambda": "1", "nu": "0"}')
    assert json.loads(out)["classification"]["verdict"] == "flat"
    code, out, _ = run(capsys, "classify", '{"n": 2, "mu": "0", "lambda": "1", "nu": "5"}')
    assert code == 0 and json.loads(out)["classification"]["verdict"] == "trivial_KE"


def test_bad_input_exit_2(capsys):
    code, _, err = run(capsys, "classify", "{not json")
    assert code == 2 and "JSON" in err
    code, _, err = run(capsys, "classify", '{"n": 2, "mu": "1"}')
    assert code == 2 and "missing" in err
    assert run(capsys, "classify", "/nonexistent/params.json")[0] == 2
    assert run(capsys, "nosuchcommand")[0] == 2


def test_immersible(capsys):
    code, out, _ = run(capsys, "immersible", POS_WITNESS, "--epsilon", "0", "--order", "20")
    assert code == 0 and json.loads(out)["certificate"]["verdict"] == "certified_to_K"
    assert run(capsys, "immersible", MU_N1_WITNESS, "--epsilon", "-1", "--order", "20")[0] == 0
    code, out, _ = run(capsys, "immersible", "--series", "0,1,-1", "--epsilon", "0")
    fv = json.loads(out)["certificate"]["first_violation"]
    assert code == 1 and (fv["k"], fv["index"], fv["value"]) == (2, 2, "-1")


def test_immersible_precondition_exit_3(capsys):
    code, _, err = run(capsys, "immersible", '{"n": 2, "mu": "1", "lambda": "0", "nu": "3"}')
    assert code == 3 and "origin condition" in err
    assert run(capsys, "immersible", "--series", "1,1")[0] == 3
    assert run(capsys, "immersible", POS_WITNESS, "--series", "0,1")[0] == 2


def test_complete(capsys):
    code, out, _ = run(capsys, "complete", FAMILY_M1)
    d = json.loads(out)["completeness"]
    assert code == 0 and d["verdict"] == "complete" and d["domain"]["r_sup"] == "inf"
    assert run(capsys, "complete", POS_WITNESS)[0] == 1
    assert run(capsys, "complete", "--poly", "0,1")[0] == 0


def test_necessary(capsys):
    code, out, _ = run(capsys, "necessary", "--poly", "0,1", "--n", "2", "--lambda", "0", "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "check,status,value,regime"
    code, _, _ = run(capsys, "necessary", "--poly=-3,2", "--h", "3/2", "--n", "2", "--lambda", "1")
    assert code == 1
    assert run(capsys, "necessary", "--poly", "0,1")[0] == 2
    assert run(capsys, "necessary", "--poly", "0,1", "--n", "1")[0] == 3


def test_series(capsys):
    code, out, _ = run(capsys, "series", POS_WITNESS, "--order", "3")
    assert code == 0 and json.loads(out)["coefficients"] == ["0", "1", "1/3", "1/12"]
    code, out, _ = run(capsys, "--format", "csv", "series", POS_WITNESS, "--order", "3")
    assert out == "index,coefficient\n0,0\n1,1\n2,1/3\n3,1/12\n"
    code, out, _ = run(capsys, "series", POS_WITNESS, "-K", "3", "--format", "table")
    assert out.splitlines()[0].split() == ["index", "coefficient"]


def test_scan_csv_and_determinism(capsys, tmp_path):
    code, out1, err = run(capsys, "scan", "--step", "1/5", "--order", "6", "--include-limit")
    assert code == 0 and out1.splitlines()[0] == "mu,certified,first_violation_k,min_coeff,completeness"
    assert out1.splitlines()[-1].startswith("0,true,,")
    assert "certified" in err
    _, out2, _ = run(capsys, "scan", "--step", "1/5", "--order", "6", "--include-limit")
    assert out1 == out2
    path = tmp_path / "s.json"
    assert run(capsys, "scan", "--step", "1/2", "--order", "4", "--format", "json", "-o", str(path))[0] == 0
    assert json.loads(path.read_text())[0]["mu"] == "-1"
    assert run(capsys, "scan", "--step", "0.1")[0] == 2


def test_profile_and_plot_data(capsys, tmp_path):
    prefix = str(tmp_path / "ex")
    code, out, _ = run(capsys, "profile", POS_WITNESS, "--num", "11", "--format", "csv", "--plot-data", prefix)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "r,y,f,fprime,detg" and len(lines) == 12
    assert (tmp_path / "ex_psi.csv").read_text().startswith("y,psi\n")
    assert (tmp_path / "ex_potential.csv").read_text().startswith("r,f\n")
    assert run(capsys, "profile", POS_WITNESS, "--r-min", "1", "--r-max", "0.5")[0] == 2


def test_config_file_and_env(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"order": 3, "format": "csv"}))
    code, out, _ = run(capsys, "series", POS_WITNESS, "--config", str(cfg))
    assert out == "index,coefficient\n0,0\n1,1\n2,1/3\n3,1/12\n"
    monkeypatch.setenv("KRSLAB_CONFIG", str(cfg))
    code, out, _ = run(capsys, "series", POS_WITNESS, "--format", "json")
    assert json.loads(out)["order"] == 3
    for bad in ({"order": 1}, {"tol": 1e-3}, {"tol": 0}, {"format": "xml"}, {"colour": 1}):
        cfg.write_text(json.dumps(bad))
        assert run(capsys, "series", POS_WITNESS)[0] == 2
    monkeypatch.delenv("KRSLAB_CONFIG")
    assert run(capsys, "--tol", "1e-3", "series", POS_WITNESS)[0] == 2


def test_float_regime(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"regime": "float", "order": 10}))
    code, out, _ = run(capsys, "immersible", POS_WITNESS, "--config", str(cfg))
    cert = json.loads(out)["certificate"]
    assert code == 0 and cert["verdict"] == "numeric_evidence" and cert["regime"].startswith("float")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "krslab", "series", POS_WITNESS, "--order", "2", "--format", "csv"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and res.stdout == "index,coefficient\n0,0\n1,1\n2,1/3\n"
