import json

import pytest

from ssmpkit.cli import main
from ssmpkit.config import ConfigError, from_dict, load_config


def write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(tmp_path, cfg_text, *extra):
    p = write(tmp_path, cfg_text)
    return main(["run", "--config", str(p), "--out", str(tmp_path / "out"), *extra])


PASSAGE = """kind = "passage"
battery = "wr2"
levels = [1.0, 2.0]
N = 500
"""


def test_passage_outputs(tmp_path):
    assert run(tmp_path, PASSAGE, "--seed", "3") == 0
    out = tmp_path / "out" / "passage-seed3"
    names = sorted(p.name for p in out.iterdir())
    assert names == ["manifest.json", "passage_level0.csv", "passage_level1.csv", "summary.json"]
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 3 and man["config"]["mesh"] == 1e-3 and "numpy" in man["versions"]


def test_same_seed_identical(tmp_path):
    run(tmp_path, PASSAGE, "--seed", "4")
    out = tmp_path / "out" / "passage-seed4"
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    run(tmp_path, PASSAGE, "--seed", "4")
    assert first == {p.name: p.read_bytes() for p in out.iterdir()}


def test_seeds_namespaced(tmp_path):
    run(tmp_path, PASSAGE, "--seed", "1")
    run(tmp_path, PASSAGE, "--seed", "2")
    a = (tmp_path / "out" / "passage-seed1" / "passage_level0.csv").read_bytes()
    b = (tmp_path / "out" / "passage-seed2" / "passage_level0.csv").read_bytes()
    assert a != b


@pytest.mark.parametrize("body", [
    'kind = "simulate"\nbattery = "wr2"\nN = 200\nT = 1.0\n',
    'kind = "rho"\nbattery = "exp1_cpp"\nN = 300\n',
    'kind = "entrance"\nbattery = "jump_entrance"\nN = 200\nlog_deltas = [-3.0]\n',
    'kind = "cone"\nN = 300\nradii = [0.1, 0.01]\n',
    'kind = "passage"\nlevels = [1.0]\nN = 100\n[spec]\nstates = 1\nQ = [[0.0]]\ndrift = [1.0]\n',
])
def test_kinds_run(tmp_path, body):
    assert run(tmp_path, body) == 0


def test_malformed_Q_exit_2(tmp_path, capsys):
    body = 'kind = "passage"\nlevels = [1.0]\n[spec]\nstates = 2\nQ = [[-1.0, -1.0], [2.0, -2.0]]\n'
    assert run(tmp_path, body) == 2
    assert "negative off-diagonal" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_parse_error_has_line(tmp_path, capsys):
    assert run(tmp_path, 'kind = "rho"\nN = \n') == 2
    assert "line 2" in capsys.readouterr().err


def test_unknown_key(tmp_path, capsys):
    assert run(tmp_path, 'kind = "rho"\nbattery = "wr2"\nNN = 3\n') == 2
    assert "NN" in capsys.readouterr().err


@pytest.mark.parametrize("d,msg", [
    ({"kind": "rho", "battery": "wr2", "N": 0}, "'N'"),
    ({"kind": "rho", "battery": "wr2", "mesh": -1.0}, "'mesh'"),
    ({"kind": "rho", "battery": "wr2", "levels": [2.0, 1.0]}, "'levels'"),
    ({"kind": "rho"}, "needs one of"),
    ({"kind": "rho", "battery": "nope"}, "unknown name"),
    ({"kind": "fly", "battery": "wr2"}, "'kind'"),
    ({"kind": "rho", "battery": "wr2", "spec_file": "x.toml"}, "one spec source"),
])
def test_config_validation(d, msg):
    with pytest.raises(ConfigError, match=msg):
        from_dict(d)


def test_spec_file(tmp_path):
    from ssmpkit.battery import exp1_cpp
    exp1_cpp().save(tmp_path / "s.toml")
    cfg = write(tmp_path, 'kind = "rho"\nspec_file = "s.toml"\nN = 200\n')
    assert load_config(cfg).spec_file == str((tmp_path / "s.toml").resolve())
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0


def test_check_subset(tmp_path, capsys):
    assert main(["check", "--only", "11", "--out", str(tmp_path), "--jobs", "1"]) == 0
    assert "PASS C11" in capsys.readouterr().out
    s = json.loads((tmp_path / "check-seed20240917" / "summary.json").read_text())
    assert s["passed"] and s["criteria"][0]["number"] == 11


def test_check_bad_criterion(tmp_path):
    assert main(["check", "--only", "13", "--out", str(tmp_path)]) == 2
