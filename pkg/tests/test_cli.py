"""Runner tests: output format, determinism, overrides, error paths.

Tests call main() in-process with tmp_path outputs; one subprocess test
covers the console-script wiring.
"""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from chernlab.bloch import band_structure
from chernlab.cli import ExperimentConfig, main
from chernlab.model import haldane_model, model_from_json

T2 = 1.0 / (3.0 * math.sqrt(3.0))


@pytest.fixture()
def model_file(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps(
        {"type": "haldane", "t1": 1.0, "t2": T2, "phi": math.pi / 2.0, "M": 0.0}))
    return str(path)


@pytest.fixture()
def tg_file(tmp_path):
    path = tmp_path / "tg.json"
    path.write_text(json.dumps({"kind": "truncated_gaussian", "a": 1.0}))
    return str(path)


@pytest.fixture()
def uniform_file(tmp_path):
    path = tmp_path / "uniform.json"
    path.write_text(json.dumps({"kind": "uniform", "a": 1.0}))
    return str(path)


def read_csv(path):
    meta, header, rows = {}, None, []
    for line in path.read_text().splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        elif header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    return meta, header, rows


def test_thresholds_pipeline_json(tmp_path, model_file, tg_file):
    out = tmp_path / "run"
    assert main(["thresholds", "--model", model_file, "--dist", tg_file,
                 "--out", str(out)]) == 0
    doc = json.loads((out / "thresholds.json").read_text())
    r = doc["results"]
    assert r["K"] == pytest.approx(22.963798680773785, rel=1e-12)
    assert r["a_zero"] == pytest.approx(2.2986155750464074e30, rel=1e-9)
    assert r["gap_over_2a0"] == pytest.approx(4.3501854733946225e-31, rel=1e-9)
    assert r["lambda_rho_coefficient"] == pytest.approx(39.97427732805992, rel=1e-9)
    assert r["lambda_rho_coefficient"] <= 39.98
    assert doc["schema_version"] == 1
    assert doc["config"]["command"] == "thresholds"


def test_csv_format_and_lossless_floats(tmp_path, model_file):
    out = tmp_path / "run"
    assert main(["bloch", "--model", model_file, "--out", str(out)]) == 0
    text = (out / "bloch.csv").read_text()
    assert text.startswith("# schema-version: 1\n")
    meta, header, rows = read_csv(out / "bloch.csv")
    assert header == ["band", "lower", "upper"]
    assert meta["command"] == "bloch"
    # 17 significant digits round-trip the double exactly
    bs = band_structure(model_from_json(json.loads(open(model_file).read())), 201)
    assert float(rows[0][2]) == bs.bands[0][1]
    assert float(rows[1][1]) == bs.bands[1][0]


def test_rerun_is_byte_identical_across_threads(tmp_path, model_file, uniform_file):
    args = ["wegner", "--model", model_file, "--dist", uniform_file,
            "--lambda", "2", "--box-l", "6", "--realizations", "40",
            "--seed", "5", "--eps-grid", "1e-2,1e-3"]
    outs = []
    for name, threads in (("a", "1"), ("b", "3"), ("c", "0")):
        out = tmp_path / name
        assert main(args + ["--out", str(out), "--threads", threads]) == 0
        outs.append((out / "wegner.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_sidecar_round_trips_and_reproduces(tmp_path, model_file, uniform_file):
    out1 = tmp_path / "first"
    assert main(["ids", "--model", model_file, "--dist", uniform_file,
                 "--lambda", "1", "--box-l", "6", "--realizations", "5",
                 "--seed", "3", "--energy-grid=-4:4:3", "--out", str(out1)]) == 0
    sidecar = json.loads((out1 / "ids.json").read_text())
    config = ExperimentConfig.from_dict(sidecar["config"])
    assert config.to_dict() == sidecar["config"]  # lossless round trip

    # rerunning purely from the recorded config reproduces the bytes
    out2 = tmp_path / "second"
    cfg_file = tmp_path / "replay.json"
    replay = dict(sidecar["config"])
    replay["output"] = str(out2)
    cfg_file.write_text(json.dumps(replay))
    assert main(["ids", "--config", str(cfg_file)]) == 0
    assert (out1 / "ids.csv").read_bytes() == (out2 / "ids.csv").read_bytes()

    # the sidecar itself is also a valid config file
    out3 = tmp_path / "third"
    assert main(["ids", "--config", str(out1 / "ids.json"),
                 "--out", str(out3)]) == 0
    assert (out1 / "ids.csv").read_bytes() == (out3 / "ids.csv").read_bytes()


def test_flags_override_config_file(tmp_path, model_file, uniform_file):
    cfg = {
        "command": "wegner",
        "model": json.loads(open(model_file).read()),
        "distribution": json.loads(open(uniform_file).read()),
        "ensemble": {"lam": 2.0, "box_L": 6, "n_realizations": 5, "master_seed": 1},
        "scan": {"eps_grid": [1e-2]},
    }
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps(cfg))
    out = tmp_path / "run"
    assert main(["wegner", "--config", str(cfg_file), "--seed", "9",
                 "--out", str(out)]) == 0
    sidecar = json.loads((out / "wegner.json").read_text())
    assert sidecar["config"]["ensemble"]["master_seed"] == 9
    assert sidecar["config"]["ensemble"]["lam"] == 2.0


def test_spectrum_renders_shifted_band_edges(tmp_path, model_file, uniform_file):
    out = tmp_path / "run"
    assert main(["spectrum", "--model", model_file, "--dist", uniform_file,
                 "--lambda-grid", "0:2:3", "--out", str(out)]) == 0
    _, header, rows = read_csv(out / "spectrum.csv")
    assert header == ["lam", "band", "lower", "upper"]
    bs = band_structure(model_from_json(json.loads(open(model_file).read())), 201)
    got = [[float(c) for c in row] for row in rows]
    # lam=1 rows: lower shifted by -a*lam, upper by +b*lam with a=b=1
    assert got[2][2] == bs.bands[0][0] - 1.0
    assert got[3][3] == bs.bands[1][1] + 1.0


def test_phase_diagram_classifies_regions(tmp_path, model_file):
    out = tmp_path / "run"
    assert main(["phase-diagram", "--model", model_file, "--grid", "9x9",
                 "--out", str(out)]) == 0
    _, header, rows = read_csv(out / "phase_diagram.csv")
    table = {(float(r[0]), float(r[1])): int(r[2]) for r in rows}
    assert set(table.values()) <= {-1, 0, 1}
    assert table[(math.pi / 2.0, 0.0)] == -1
    assert table[(-math.pi / 2.0, 0.0)] == 1
    assert table[(math.pi / 2.0, -6.0)] == 0
    assert table[(math.pi / 2.0, 6.0)] == 0


def test_msa_probe_and_marker_outputs(tmp_path, model_file, uniform_file):
    out = tmp_path / "run"
    assert main(["msa-probe", "--model", model_file, "--dist", uniform_file,
                 "--lambda", "0.3", "--theta", "1", "--energy", "3.2",
                 "--box-grid", "7", "--realizations", "20", "--seed", "11",
                 "--out", str(out)]) == 0
    _, header, rows = read_csv(out / "msa_probe.csv")
    assert header == ["box_L", "theta", "probability", "ci_low", "ci_high", "n"]
    assert 0.0 <= float(rows[0][2]) <= 1.0

    assert main(["marker", "--model", model_file, "--box-l", "10",
                 "--window-l", "3", "--out", str(out)]) == 0
    _, _, rows = read_csv(out / "marker.csv")
    assert float(rows[0][2]) == pytest.approx(-1.0, abs=0.05)


def test_moments_metadata_carries_slopes(tmp_path, model_file):
    out = tmp_path / "run"
    assert main(["moments", "--model", model_file, "--p", "2",
                 "--window", "2:0.5", "--t-grid", "1:100:5",
                 "--box-l", "10", "--out", str(out)]) == 0
    meta, header, rows = read_csv(out / "moments.csv")
    assert header == ["T", "mean", "stderr", "n"]
    assert float(rows[0][0]) == 0.0  # T=0 envelope row always present
    assert float(meta["transport_slope"]) > 1.5
    assert float(meta["raw_slope"]) < 1.0


def test_invalid_config_exits_nonzero_with_line(tmp_path, model_file, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "command": "wegner",\n  "mystery": 3\n}\n')
    code = main(["wegner", "--config", str(bad), "--model", model_file])
    assert code == 2
    err = capsys.readouterr().err
    assert f"{bad}:1:" in err and "mystery" in err

    baddist = tmp_path / "baddist.json"
    baddist.write_text('{\n  "kind": "uniform",\n  "a": -3\n}\n')
    code = main(["wegner", "--model", model_file, "--dist", str(baddist),
                 "--lambda", "1"])
    assert code == 2
    assert f"{baddist}:2:" in capsys.readouterr().err


def test_command_mismatch_and_runtime_errors(tmp_path, model_file, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "bloch"}))
    assert main(["wegner", "--config", str(cfg), "--model", model_file]) == 2
    assert "bloch" in capsys.readouterr().err

    # gapless model: the numerical error label propagates, exit 1
    gapless = tmp_path / "gapless.json"
    gapless.write_text(json.dumps({"type": "haldane", "t1": 1.0, "t2": T2,
                                   "phi": 0.0, "M": 0.0}))
    out = tmp_path / "run"
    assert main(["chern", "--model", str(gapless), "--out", str(out)]) == 1
    assert "gapless" in capsys.readouterr().err


def test_console_script_entry_point(tmp_path, model_file):
    out = tmp_path / "run"
    proc = subprocess.run(
        [sys.executable, "-m", "chernlab.cli", "bloch", "--model", model_file,
         "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert (out / "bloch.csv").exists()
