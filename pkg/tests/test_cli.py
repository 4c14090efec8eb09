import json
import subprocess
import sys

import pytest

from rmslam.cli import main
from rmslam.simulator import read_records


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--seed", "3", "--set", "n_scans=60", "--out", str(out)]) == 0
    for name in ("series.csv", "summary.json", "plots.svg"):
        assert (out / name).exists()
    assert "pos_rmse=" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    assert summary["trials"] == 1 and summary["seeds"] == [3]


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n_scans = 40\nseed = 1\nestimator = efa\n")
    out = tmp_path / "o"
    assert main(["mc", "--config", str(cfg), "--trials", "2", "--seed", "5", "--estimator", "both",
                 "--exploit-extent", "off", "--out", str(out), "--no-plots"]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["seeds"] == [5, 6]
    assert s["parameters"]["estimator"] == "both"
    assert s["parameters"]["exploit_extent"] is False
    assert s["parameters"]["n_scans"] == 40
    assert not (out / "plots.svg").exists()


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["run", "--set", "nonsense=1", "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == 2
    assert main(["mc", "--trials", "0", "--out", str(tmp_path)]) == 2


def test_argparse_rejects_bad_choice():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--estimator", "ukf"])
    assert exc.value.code != 0


def test_export_subcommand(tmp_path):
    src = tmp_path / "src"
    assert main(["run", "--set", "n_scans=40", "--out", str(src), "--no-plots"]) == 0
    dst = tmp_path / "dst"
    assert main(["export", "--in", str(src), "--format", "csv,json,svg", "--out", str(dst)]) == 0
    assert (dst / "series.csv").read_bytes() == (src / "series.csv").read_bytes()
    assert (dst / "summary.json").read_bytes() == (src / "summary.json").read_bytes()
    assert (dst / "plots.svg").exists()
    assert main(["export", "--in", str(src), "--format", "pdf"]) == 2
    assert main(["export", "--in", str(tmp_path / "nothing")]) == 1


def test_record_subcommand(tmp_path):
    path = tmp_path / "scans.jsonl"
    assert main(["record", "--seed", "2", "--set", "n_scans=15", "--out", str(path)]) == 0
    scenario, scans = read_records(path)
    assert scenario.seed == 2 and len(scans) == 15


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "rmslam", "run", "--set", "n_scans=20", "--out", str(tmp_path), "--no-plots"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "rmslam", "run", "--set", "x=1"], capture_output=True, text=True)
    assert proc.returncode == 2 and "unknown config key" in proc.stderr
