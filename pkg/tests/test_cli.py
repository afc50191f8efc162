import json
import subprocess
import sys

import pytest

from aware.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_tu(directory, name):
    directory.mkdir(parents=True)
    edges = [(1, 2), (2, 3), (3, 1), (4, 5), (5, 6), (7, 8), (8, 9), (9, 7), (9, 10)]
    indicator = [1, 1, 1, 2, 2, 2, 3, 3, 3, 3]
    both = edges + [(v, u) for u, v in edges]
    (directory / f"{name}_A.txt").write_text("".join(f"{u}, {v}\n" for u, v in both))
    (directory / f"{name}_graph_indicator.txt").write_text("".join(f"{g}\n" for g in indicator))
    (directory / f"{name}_graph_labels.txt").write_text("1\n-1\n1\n")


def test_usage_errors(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys)[0] == 2
    assert run(capsys, "rip", "--family", "uniform")[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "aware", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()


def test_verify_single_suite(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--suite", "walk-identity", "--seed", "7", "--graphs", "10",
                       "--out", str(tmp_path / "v.json"))
    assert code == 0
    report = json.loads(out)
    assert report["summary"]["pass"] and report["seed"] == 7
    assert report["summary"]["checks"] == {"walk-identity": 40}
    assert (tmp_path / "v.json").read_text() == out


def test_verify_is_byte_identical(capsys):
    a = run(capsys, "verify", "--suite", "ngram", "--seed", "3", "--graphs", "5")[1]
    b = run(capsys, "verify", "--suite", "ngram", "--seed", "3", "--graphs", "5")[1]
    assert a == b


def test_train_eval_and_rerun(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"T": 2, "r": 8, "r_prime": 8, "L": 1, "lr": 0.01, "epochs": 3, "patience": 3}))
    argv = ["train", "--data", "synthetic:planted-motif:40", "--config", str(cfg), "--seeds", "0,1",
            "--out-dir", str(tmp_path / "runs")]
    code, out, _ = run(capsys, *argv)
    assert code == 0
    first = json.loads(out)
    assert [r["seed"] for r in first["per_seed"]] == [0, 1]
    again = json.loads(run(capsys, *argv)[1])
    first.pop("timing"), again.pop("timing")
    assert first == again
    run_dir = tmp_path / "runs" / first["run_dir"].split("/")[-1]
    assert json.loads((run_dir / "config.json").read_text())["config"]["seeds"] == [0, 1]
    code, out, _ = run(capsys, "eval", "--data", "synthetic:planted-motif:40",
                       "--checkpoint", str(run_dir / "seed0.ckpt"))
    assert code == 0 and 0.0 <= json.loads(out)["value"] <= 1.0

    code, out, _ = run(capsys, "interpret", "--data", "synthetic:planted-motif:40", "--checkpoint",
                       str(run_dir / "seed0.ckpt"), "--graph", "2", "--alignment", "--out-dir", str(tmp_path / "i"))
    assert code == 0
    res = json.loads(out)
    out_dir = tmp_path / "i" / res["run_dir"].split("/")[-1]
    for name in ("importance.json", "importance.dot", "alignment.csv", "config.json"):
        assert (out_dir / name).exists()
    assert len(res["alignment"]["cosines"]) == 3


def test_unknown_config_key_is_rejected(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"T": 2, "depth": 4}))
    code, _, err = run(capsys, "train", "--data", "synthetic:walk-count:20", "--config", str(cfg),
                       "--out-dir", str(tmp_path))
    assert code == 1 and "depth" in err


def test_ingest_from_data_dir(capsys, tmp_path, monkeypatch):
    write_tu(tmp_path / "IMDB-BINARY", "IMDB-BINARY")
    monkeypatch.setenv("AWARE_DATA_DIR", str(tmp_path))
    code, out, _ = run(capsys, "ingest", "--data", "imdb-b", "--out", str(tmp_path / "imdb.json"))
    assert code == 0
    summary = json.loads(out)
    assert summary["graphs"] == 3 and summary["task_kind"] == "binary-classification"
    assert summary["value_counts"] == [65]
    assert run(capsys, "ingest", "--data", str(tmp_path / "imdb.json"))[0] == 0


def test_missing_dataset_exits_one(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("AWARE_DATA_DIR", str(tmp_path))
    code, _, err = run(capsys, "ingest", "--data", "imdb-b")
    assert code == 1 and err


def test_rip_csv(capsys):
    code, out, _ = run(capsys, "rip", "--r", "32,64", "--matrices", "2", "--vectors", "20",
                       "--recovery-trials", "3")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "family,r,K,n,s,trials,measured_epsilon,recovery_rate"
    assert len(lines) == 3


def test_ablate_writes_table(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"T": 2, "r": 6, "r_prime": 6, "L": 1, "epochs": 1, "patience": 1}))
    code, out, _ = run(capsys, "ablate", "--data", "synthetic:planted-motif:30", "--config", str(cfg),
                       "--out-dir", str(tmp_path / "runs"))
    assert code == 0
    rows = json.loads(out)["rows"]
    assert len(rows) == 8 and rows[0]["config"] == "base"
