import json
import subprocess
import sys

import pytest

from relupath import cli
from relupath.serialize import dump_json, net_to_json


def run(argv, capsys):
    code = cli._run(cli.cli, argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def files(tmp_path, v8_net):
    net = tmp_path / "net.json"
    net.write_text(dump_json(net_to_json(v8_net)))
    pts = tmp_path / "pts.json"
    pts.write_text(json.dumps({"points": [[1, 1, 0, 0.5], [-1, -1, 0.25, 0]]}))
    samples = tmp_path / "s.json"
    samples.write_text(json.dumps({"values": [[0, 0], [1, 1], [0.1, 0.1], [2, 2]]}))
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({
        "task": {"L": 2, "d": 2, "V_star": 1.0, "target_width": 3, "B": 1.0, "sigma": 0.5,
                 "n": [60, 120], "m_eval": 1000},
        "cover": {"V_grid": [1.0], "width": 2, "count_per_V": 4},
        "replications": 2,
        "seeds": {"master": 3},
    }))
    return tmp_path


def test_compute_v8(files, capsys):
    code, out, _ = run(["compute", str(files / "net.json"), "--values-only"], capsys)
    assert code == 0 and out.strip() == '{"V": 8.0}'
    code, out, _ = run(["compute", str(files / "net.json")], capsys)
    obj = json.loads(out)
    assert obj["V"] == 8.0 and obj["layers_outer_first"][0][:2] == [3.0, 2.0]


def test_normalize_writes_file(files, capsys):
    out = files / "norm.json"
    code, _, _ = run(["normalize", str(files / "net.json"), "-o", str(out)], capsys)
    obj = json.loads(out.read_text())
    assert code == 0 and obj["V"] == 8.0 and obj["normalized"] is True
    assert obj["layers"][-1]["probs"][0][:2] == [0.75, 0.25]


def test_complexity_commands(files, capsys):
    code, out, _ = run(["complexity", "estimate", "--set", str(files / "pts.json")], capsys)
    obj = json.loads(out)
    assert code == 0 and obj["exact"] and set(obj) >= {"estimate", "std_error", "bound", "lambda_opt"}
    code, out, _ = run(["complexity", "bound", "--V", "1", "--L", "1", "--d", "1", "--n", "4"], capsys)
    assert json.loads(out)["bound"] == pytest.approx(3.33022, abs=1e-5)


def test_entropy_commands(files, capsys):
    code, out, _ = run(["entropy", "bound", "--V", "1", "--L", "1", "--d", "1", "--eps", "1"], capsys)
    assert code == 0 and json.loads(out)["entropy_bound"] == pytest.approx(2840.517, abs=1e-3)
    code, out, _ = run(["entropy", "fano", "--n", "100", "--sigma", "1", "--rn", "0.05",
                        "--rnstar", "0.04", "--eps", str(0.4 ** 0.5)], capsys)
    assert json.loads(out)["entropy_upper"] == pytest.approx(5.3863, abs=1e-4)
    code, out, _ = run(["entropy", "pack", "--samples", str(files / "s.json"), "--eps", "0.5"], capsys)
    assert json.loads(out)["count"] == 3


def test_experiment_command(files, capsys):
    out = files / "out.csv"
    code, _, _ = run(["experiment", "run", "--config", str(files / "exp.json"), "--out", str(out)], capsys)
    assert code == 0
    assert out.read_text().startswith("run_id,n,V_star")


def test_missing_flag_exit_2(capsys):
    code, _, err = run(["complexity", "bound", "--L", "2", "--d", "1", "--n", "3"], capsys)
    assert code == 2 and "--V" in err


def test_invalid_value_exit_2(files, capsys):
    code, _, err = run(["entropy", "bound", "--V", "1", "--L", "1", "--d", "1", "--eps", "-1"], capsys)
    assert code == 2 and "--eps" in err
    bad = files / "bad.json"
    bad.write_text(json.dumps({"task": {}, "cover": {}, "replications": 2, "bogus": 1}))
    code, _, err = run(["experiment", "run", "--config", str(bad)], capsys)
    assert code == 2 and "bogus" in err
    net = files / "badnet.json"
    net.write_text(json.dumps({"d": 1, "layers": [{"weights": [[1]], "extra": 0}]}))
    code, _, err = run(["compute", str(net)], capsys)
    assert code == 2 and "extra" in err


def test_io_error_exit_3(files, capsys):
    code, _, _ = run(["compute", str(files / "missing.json")], capsys)
    assert code == 3
    code, _, _ = run(["normalize", str(files / "net.json"), "-o", str(files / "no" / "such" / "dir.json")], capsys)
    assert code == 3


def test_dispatch(files, capsys, monkeypatch):
    monkeypatch.chdir(files)
    assert cli.dispatch({"subcommand": "compute", "params": {"net": "net.json", "values-only": True}}) == 0
    assert capsys.readouterr().out.strip() == '{"V": 8.0}'
    assert cli.dispatch({"subcommand": "compute", "params": {"net": "net.json"}, "colour": 1}) == 2
    assert "colour" in capsys.readouterr().err
    assert cli.dispatch({"subcommand": "fly"}) == 2
    assert cli.dispatch({"subcommand": "complexity-bound", "params": {"V": 1, "L": 1, "d": 1, "n": 4},
                         "seed": 3}) == 2
    assert cli.dispatch({"subcommand": "experiment-run", "params": {"config": "exp.json"},
                         "seed": 5, "threads": 2, "output": "o.csv"}) == 0
    assert (files / "o.csv").exists()


def test_console_scripts(files):
    res = subprocess.run(["pathnorm", "compute", str(files / "net.json"), "--values-only"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout) == {"V": 8.0}
    res = subprocess.run(["complexity", "bound", "--V", "1"], capture_output=True, text=True)
    assert res.returncode == 2
    res = subprocess.run([sys.executable, "-m", "relupath", "compute", str(files / "nope.json")],
                         capture_output=True, text=True)
    assert res.returncode == 3
