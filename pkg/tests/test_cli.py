import json
import os
import shutil

import numpy as np
import pytest

from singmix.cli import main

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def run(*argv):
    return main(list(argv))


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def small_config(out_dir, **overrides):
    base = {
        "version": 1,
        "domain": {"shape": "rectangle", "bounds": [[0.0, 1.0], [0.0, 1.0]]},
        "h": 0.125,
        "kernel": {"preset": "fractional", "s": 0.5},
        "delta": {"constant": 1.0},
        "data": {"nu": {"density": "1.0"}},
        "n_list": [1, 2],
        "claims": [],
        "out_dir": out_dir,
    }
    base.update(overrides)
    return base


def test_exponents_subcommand(capsys):
    assert run("exponents", "--N", "3", "--r", "1.2", "--m", "2.0",
               "--delta-star", "1.0") == 0
    out = capsys.readouterr().out
    assert "T7.iii" in out
    assert "6" in out


def test_malformed_json_exits_1(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"version": 1,,}')
    assert run("solve", "--config", str(path)) == 1
    err = capsys.readouterr().err
    assert ":2:" in err or ":1:" in err  # line-precise location


def test_schema_violation_exits_1(tmp_path, capsys):
    cfg = write_config(tmp_path, "bad.json",
                       small_config(str(tmp_path / "out"), n_list=[4, 2]))
    assert run("solve", "--config", cfg) == 1
    assert "n_list" in capsys.readouterr().err


def test_zero_data_solve(tmp_path):
    out = str(tmp_path / "out")
    cfg = write_config(tmp_path, "zero.json",
                       small_config(out, data={}))
    assert run("solve", "--config", cfg) == 0
    u = np.load(os.path.join(out, "arrays", "u_n2.npy"))
    assert np.all(u == 0.0)
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert "zero-source-degenerate-barrier" in report["flags"]


def test_strict_flags_degenerate(tmp_path):
    out = str(tmp_path / "out")
    cfg = write_config(tmp_path, "zero.json", small_config(out, data={}))
    assert run("solve", "--config", cfg, "--strict") == 5


def test_sample_atom_config_records_residuals(tmp_path):
    out = str(tmp_path / "atom_out")
    cfg_path = os.path.join(CONFIG_DIR, "atom2d.json")
    assert run("solve", "--config", cfg_path, "--out", out) == 0
    report = json.loads(open(os.path.join(out, "report.json")).read())
    residuals = report["weak_residuals"]
    assert residuals, "weak residuals recorded"
    assert all(v <= 1e-6 for v in residuals.values())
    assert run("verify", "--config", cfg_path, "--out", out) == 0
    csv_text = open(os.path.join(out, "conformance.csv")).read()
    assert "Lemma 5.2(a)" in csv_text


def test_artifacts_bit_identical(tmp_path):
    cfg = write_config(tmp_path, "cfg.json", small_config("unused"))
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    assert run("solve", "--config", cfg, "--out", out_a) == 0
    assert run("solve", "--config", cfg, "--out", out_b) == 0
    for name in ("report.json", "norms.csv", os.path.join("arrays", "u_n1.npy")):
        with open(os.path.join(out_a, name), "rb") as fa, \
             open(os.path.join(out_b, name), "rb") as fb:
            assert fa.read() == fb.read()


def test_verify_missing_artifacts_exits_3(tmp_path):
    cfg = write_config(tmp_path, "cfg.json", small_config(str(tmp_path / "nope")))
    assert run("verify", "--config", cfg) == 3


def test_verify_empty_claims_passes(tmp_path):
    out = str(tmp_path / "out")
    cfg = write_config(tmp_path, "cfg.json", small_config(out))
    assert run("solve", "--config", cfg) == 0
    assert run("verify", "--config", cfg) == 0
    lines = open(os.path.join(out, "conformance.csv")).read().strip().splitlines()
    assert len(lines) == 1  # header only


def test_verify_failing_claim_exits_4(tmp_path):
    out = str(tmp_path / "out")
    claim = {"id": "impossible", "kind": "marcinkiewicz_tail",
             "window": [1e-3, 1e-2], "min_exponent": 50.0,
             "paper_ref": "Eq. (5.17)"}
    cfg = write_config(tmp_path, "cfg.json", small_config(out, claims=[claim]))
    assert run("solve", "--config", cfg) == 0
    assert run("verify", "--config", cfg) == 4


def test_verify_inline_solves(tmp_path):
    out = str(tmp_path / "out")
    cfg = write_config(tmp_path, "cfg.json", small_config(out))
    assert run("verify", "--config", cfg, "--inline") == 0
    assert os.path.exists(os.path.join(out, "report.json"))


def test_threads_env_fallback(tmp_path, monkeypatch):
    out = str(tmp_path / "out")
    cfg = write_config(tmp_path, "cfg.json", small_config(out))
    monkeypatch.setenv("SMP_THREADS", "1")
    assert run("solve", "--config", cfg) == 0


def test_sweep_writes_per_h_dirs(tmp_path):
    out = str(tmp_path / "out")
    payload = small_config(out)
    del payload["h"]
    payload["h_list"] = [0.125, 0.0625]
    cfg = write_config(tmp_path, "cfg.json", payload)
    assert run("sweep", "--config", cfg) == 0
    assert os.path.exists(os.path.join(out, "h_0.125", "report.json"))
    assert os.path.exists(os.path.join(out, "h_0.0625", "report.json"))
    assert run("verify", "--config", cfg) == 0
