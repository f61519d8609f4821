import json
import math

import pytest

from nlrd import cli, config as cfgmod, verify
from nlrd.errors import ValidationError
from nlrd.io import atomic_write_text, canonical_json, config_digest
from nlrd.simulator import read_snapshot


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def data_rows(text):
    return [ln.split(",") for ln in text.splitlines() if not ln.startswith("#")]


def test_kernels_table(capsys):
    code, out, _ = run(["kernels", "--set", "kernel.profile=spherical", "--set", "kernel.dim=3",
                        "--set", 'r={"values": [0.5, 1.5]}', "--set", 'k={"values": [0.0]}'], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# config_sha256=") and lines[1].startswith("# config=")
    cfg = json.loads(lines[1][len("# config="):])
    assert lines[0].split("=", 1)[1] == config_digest(cfg)
    rows = data_rows(out)
    assert rows[0] == ["space", "x", "value"]
    assert math.isclose(float(rows[1][2]), 3.0 / (4.0 * math.pi), rel_tol=1e-14)
    assert float(rows[2][2]) == 0.0 and float(rows[3][2]) == 1.0


def test_kernels_ft_check(capsys):
    code, out, _ = run(["kernels", "--mode", "ft-check", "--set", "kernel.profile=screened",
                        "--set", 'k={"values": [0.5, 2.0]}'], capsys)
    assert code == 0
    for row in data_rows(out)[1:]:
        assert float(row[3]) < 1e-6


def test_out_file_and_rerun_from_emitted_config(tmp_path, capsys):
    out = tmp_path / "k.csv"
    assert run(["kernels", "--set", "kernel.lambda=2.0", "--out", str(out)], capsys)[0] == 0
    emitted = tmp_path / "k.csv.config.json"
    assert emitted.exists()
    again = tmp_path / "k2.csv"
    assert run(["kernels", "--config", str(emitted), "--out", str(again)], capsys)[0] == 0
    assert out.read_bytes() == again.read_bytes()
    assert not [p for p in tmp_path.iterdir() if p.name.endswith(".tmp")]


def test_validation_errors_exit_1(capsys):
    code, _, err = run(["kernels", "--set", "bogus=1"], capsys)
    assert code == 1
    rec = json.loads(err)
    assert rec["exit_code"] == 1 and "bogus" in rec["error"]["message"]
    assert run(["kernels", "--set", "kernel.profile=riesz"], capsys)[0] == 1
    assert run(["nonsense"], capsys)[0] == 1
    assert run(["rg", "--set", "schema_version=2"], capsys)[0] == 1


def test_local_loop_d3_exit_2(capsys):
    code, _, err = run(["loops", "--set", "kernel.profile=local", "--set", "kernel.dim=3"], capsys)
    assert code == 2
    rec = json.loads(err)
    assert rec["error"]["type"] == "UVDivergenceError" and rec["exit_code"] == 2


def test_rg_pole_exit_2(capsys):
    assert run(["rg", "flow", "--set", "eps=0"], capsys)[0] == 2


def test_loops_csv_columns(capsys):
    code, out, _ = run(["loops", "--set", 't={"values": [1.0]}'], capsys)
    assert code == 0
    rows = data_rows(out)
    assert rows[0] == ["integral", "profile", "d", "lambda", "D", "t", "value", "est_error", "method"]
    assert rows[1][0] == "i2" and rows[1][-1] == "closed_form"


def test_rg_model2_table(capsys):
    code, out, _ = run(["rg", "flow", "--set", "model=model2", "--set", 'gamma={"values": [1.0, 0.5]}'], capsys)
    assert code == 0
    rows = data_rows(out)
    assert rows[0] == ["gamma", "u", "tau", "X", "b"]
    assert float(rows[1][1]) == 0.1


def test_meanfield_and_propagator(capsys):
    code, out, _ = run(["meanfield", "--set", 't={"values": [0.0, 1.0]}',
                        "--set", "params.annihilation.rate=1.0"], capsys)
    assert code == 0 and float(data_rows(out)[2][1]) == 0.5
    code, out, _ = run(["propagator", "eval", "--set", 'k={"values": [1.0]}', "--set", 't={"values": [1.0]}'],
                       capsys)
    assert code == 0 and math.isclose(float(data_rows(out)[1][2]), math.exp(-1.0), rel_tol=1e-15)


SIM_ARGS = ["simulate", "--set", "box=200", "--set", "t_max=5", "--set", "replicas=2", "--set", "seed=3",
            "--set", 'record={"min": 0.5, "max": 5, "n": 5, "spacing": "log"}']


def test_simulate_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(SIM_ARGS + ["--out", str(a)], capsys)[0] == 0
    assert run(SIM_ARGS + ["--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    rows = data_rows(a.read_text())
    assert rows[0] == ["t", "density", "stderr", "n_replicas"] and rows[1][3] == "2"


def test_simulate_snapshot(tmp_path, capsys):
    snap = tmp_path / "s.bin"
    assert run(SIM_ARGS + ["--set", f"snapshot={snap}"], capsys)[0] == 0
    assert read_snapshot(snap).shape[1] == 1


def test_simulate_capacity_exit_2(capsys):
    code, _, err = run(["simulate", "--set", "params.branching.rate=2.0", "--set", "params.annihilation.rate=0",
                        "--set", "box=100", "--set", "t_max=20", "--set", "max_particles=500"], capsys)
    assert code == 2 and json.loads(err)["error"]["type"] == "CapacityError"


def test_verify_report_schema(monkeypatch, capsys):
    monkeypatch.setattr(verify, "FAST_CHECKS", (verify.check_model1_flow, verify.check_cs_identity))
    code, out, _ = run(["verify"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["level"] == "fast" and rep["all_pass"] is True
    for entry in rep["checks"]:
        assert {"name", "target", "measured", "tol", "pass"} <= set(entry)
    assert rep["config_sha256"] == config_digest(rep["config"])


def test_config_resolution():
    cfg = cfgmod.resolve("rg", {"eps": 0.5})
    assert cfg["schema_version"] == 1 and cfg["command"] == "rg" and cfg["eps"] == 0.5 and cfg["u"] == 0.1
    with pytest.raises(ValidationError):
        cfgmod.resolve("rg", {"gamma": {"min": 1, "bogus": 2}})
    with pytest.raises(ValidationError):
        cfgmod.grid({"min": 0.0, "max": 1.0, "n": 3, "spacing": "log"}, "g")
    assert list(cfgmod.grid({"values": [3, 1]}, "g")) == [3.0, 1.0]


def test_digest_ignores_key_order(tmp_path):
    assert canonical_json({"b": 1, "a": [1, 2]}) == canonical_json({"a": [1, 2], "b": 1})
    assert config_digest({"b": 1, "a": 2}) == config_digest({"a": 2, "b": 1})
    p = tmp_path / "sub" / "x.txt"
    atomic_write_text(p, "hello")
    assert p.read_text() == "hello"
