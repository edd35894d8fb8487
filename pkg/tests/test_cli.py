import csv
import io
import json
import math
import shutil
import subprocess

import pytest

from cutofflab import cli
from cutofflab.verify import CheckResult


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


CYCLE = {"model": {"kind": "cycle", "params": {"n": 6}}, "seed": 1, "seeds": 8, "budget": 100,
         "epsilons": [0.25, 0.1]}


def test_analyze_report_fields(tmp_path, capsys):
    cfg = write_cfg(tmp_path, CYCLE)
    assert cli.main(["analyze", cfg]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["n"] == 6
    assert rep["lambda"] == pytest.approx(1 - math.cos(2 * math.pi / 6), abs=1e-12)
    assert set(rep["t_mix"]) == {"0.25", "0.1"}
    assert rep["kappa1"] == pytest.approx(0.0, abs=1e-12)
    assert all(v["holds"] for v in rep["inequality_checks"].values())


def test_analyze_is_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, CYCLE)
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert cli.main(["analyze", cfg, "-o", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_dumps_format():
    assert cli.dumps({"b": 0.1, "a": [1, None, float("inf")], "c": True}) == \
        '{"a": [1, null, null], "b": 0.10000000000000001, "c": true}'
    assert cli._eps_key(0.25) == "0.25"
    with pytest.raises(TypeError):
        cli.dumps(object())


def test_profile_rank_one_closed_form(tmp_path):
    cfg = write_cfg(tmp_path, {"model": {"kind": "rank_one",
                                         "params": {"n": 6, "pi_min": 0.1}}})
    out = tmp_path / "p.csv"
    assert cli.main(["profile", cfg, "--t1", "3", "--steps", "7", "-o", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0]) == cli.PROFILE_HEADER
    for r in rows:
        t = float(r["t"])
        assert float(r["dtv"]) == pytest.approx(math.exp(-t) * 0.9, abs=1e-12)
    assert rows[0]["entropy_slope"] == "null"


def test_profile_cube_nonincreasing(tmp_path):
    cfg = write_cfg(tmp_path, {"model": {"kind": "hypercube", "params": {"n": 8}}})
    out = tmp_path / "p.csv"
    assert cli.main(["profile", cfg, "--t1", "12", "--steps", "13", "-o", str(out)]) == 0
    dtv = [float(r["dtv"]) for r in csv.DictReader(io.StringIO(out.read_text()))]
    assert all(b <= a + 1e-12 for a, b in zip(dtv, dtv[1:]))


def test_sweep_csv(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", "cube", "--sizes", "4,6", "-o", str(out)]) == 0
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert rows[0] == cli.SWEEP_HEADER
    assert len(rows) == 3
    assert cli.main(["sweep", "cube", "--sizes", "4,40", "-o", str(out)]) == 0
    assert "TooLarge" in capsys.readouterr().err


@pytest.mark.parametrize("argv_cfg,code", [
    ("{not json", 2),
    (json.dumps({"seed": 1}), 2),
    (json.dumps({"model": {"kind": "cycle", "params": {"n": 6}}, "epsilons": [0.7]}), 2),
    (json.dumps({"model": {"kind": "hypercube", "params": {"n": 30}}}), 3),
    (json.dumps({"model": {"kind": "cycle", "params": {"n": 6}}, "start_state": 9}), 2),
])
def test_exit_codes(tmp_path, argv_cfg, code):
    p = tmp_path / "bad.json"
    p.write_text(argv_cfg)
    cmd = "profile" if "start_state" in argv_cfg else "analyze"
    extra = ["--t1", "1"] if cmd == "profile" else []
    assert cli.main([cmd, str(p), *extra]) == code


def test_input_errors(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, CYCLE)
    assert cli.main(["profile", cfg, "--t1", "1", "--steps", "1"]) == 2
    assert cli.main(["sweep", "nope", "--sizes", "4"]) == 2
    assert cli.main(["sweep", "cube", "--sizes", "a,b"]) == 2
    assert cli.main(["analyze", str(tmp_path / "missing.json")]) == 2
    monkeypatch.setenv("CUTOFFLAB_THREADS", "zero")
    assert cli.main(["analyze", cfg]) == 2


def test_matrix_file_model(tmp_path, capsys):
    m = tmp_path / "m.txt"
    m.write_text("0 0 0.7\n0 1 0.3\n1 0 0.1\n1 1 0.9\n")
    cfg = write_cfg(tmp_path, {"model": {"kind": "matrix_file", "params": {"path": str(m)}}})
    assert cli.main(["verify", cfg]) == 0
    assert "PASS" in capsys.readouterr().out
    m.write_text("0 0 0.7\n0 1 0.2\n1 0 0.1\n1 1 0.9\n")
    assert cli.main(["verify", cfg]) == 2


def test_verify_exit_one_on_failure(tmp_path, monkeypatch, capsys):
    cfg = write_cfg(tmp_path, CYCLE)
    monkeypatch.setattr(cli, "run_battery",
                        lambda *a, **k: [CheckResult("forced", "FAIL", -1.0)])
    assert cli.main(["verify", cfg]) == 1
    assert "forced FAIL" in capsys.readouterr().out


def test_console_script(tmp_path):
    exe = shutil.which("cutofflab")
    if exe is None:
        pytest.skip("console script not installed")
    res = subprocess.run([exe, "sweep", "rank_one", "--sizes", "8"], capture_output=True,
                         text=True, timeout=120)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == ",".join(cli.SWEEP_HEADER)
