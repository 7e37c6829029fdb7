import json
import subprocess
import sys

from fbsnn.cli import main
from fbsnn.io import read_metrics_csv

TINY = """[experiment]
task = {task}
seeds = 0-1

[training]
epochs = 2
T = 300
batch_size = 10
eta = {eta}
n_val_eval = 20

[dataset]
n_train = 30
n_val = 20
n_test = 20
"""


def _cfg(tmp_path, task="binary", eta="1e-4"):
    path = tmp_path / f"{task}.ini"
    path.write_text(TINY.format(task=task, eta=eta))
    return str(path)


def test_gen_dataset_is_byte_identical(tmp_path):
    cfg = _cfg(tmp_path, "yinyang")
    assert main(["gen-dataset", "--config", cfg, "--out-dir", str(tmp_path / "a")]) == 0
    assert main(["gen-dataset", "--config", cfg, "--out-dir", str(tmp_path / "b")]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "yinyang_seed1_test.fbsd" in names and "manifest.json" in names
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_train_outputs_and_figures(tmp_path):
    out = tmp_path / "run"
    assert main(["train", "--config", _cfg(tmp_path), "--out-dir", str(out), "--figures"]) == 0
    rows = read_metrics_csv(out / "metrics_seed0.csv")
    assert [r["index"] for r in rows] == [0, 1, 2]
    assert {"seed", "train_loss", "val_loss", "target_error", "accuracy", "rate_c0_n0"} <= set(rows[0])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seeds"] == [0, 1] and summary["aggregate"]["test_accuracy"]["n"] == 2
    assert "no_learning" not in summary
    assert (out / "metrics_aggregate.csv").exists()
    assert (out / "metrics_seed1_weights.txt").exists()
    assert (out / "training_curves.png").stat().st_size > 1000


def test_train_from_dataset_files_matches_regenerated(tmp_path):
    cfg = _cfg(tmp_path)
    main(["gen-dataset", "--config", cfg, "--out-dir", str(tmp_path / "data")])
    main(["train", "--config", cfg, "--out-dir", str(tmp_path / "x")])
    main(["train", "--config", cfg, "--out-dir", str(tmp_path / "y"), "--data-dir", str(tmp_path / "data")])
    assert (tmp_path / "x" / "metrics_seed0.csv").read_bytes() == (tmp_path / "y" / "metrics_seed0.csv").read_bytes()


def test_eta_zero_flags_no_learning(tmp_path):
    out = tmp_path / "run"
    assert main(["train", "--config", _cfg(tmp_path, eta="0"), "--out-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["no_learning"] is True
    rows = read_metrics_csv(out / "metrics_seed0.csv")
    assert rows[0]["val_loss"] == rows[-1]["val_loss"]


def test_online_mode(tmp_path):
    out = tmp_path / "run"
    text = TINY.format(task="binary", eta="2e-5").replace("[dataset]", "samples = 60\nwindow = 20\n\n[dataset]")
    (tmp_path / "online.ini").write_text(text)
    argv = ["train", "--config", str(tmp_path / "online.ini"), "--mode", "online", "--out-dir", str(out),
            "--seed-list", "0"]
    assert main(argv) == 0
    rows = read_metrics_csv(out / "metrics_seed0.csv")
    assert [r["index"] for r in rows] == [0, 1, 2, 3]


def test_sweep_mismatch(tmp_path):
    out = tmp_path / "sweep"
    argv = ["sweep-mismatch", "--config", _cfg(tmp_path), "--out-dir", str(out), "--seed-list", "0",
            "--cv-list", "0,0.05,0.1,0.2", "--p-list", "1,2", "--epochs", "1", "--figures"]
    assert main(argv) == 0
    rows = read_metrics_csv(out / "mismatch_sweep.csv")
    assert len(rows) == 8 and all(r["status"] == "ok" for r in rows)
    assert {(r["cv"], r["p"]) for r in rows} == {(c, p) for c in (0, 0.05, 0.1, 0.2) for p in (1, 2)}
    cells = json.loads((out / "mismatch_summary.json").read_text())["cells"]
    assert set(cells) == {f"cv={c:g},p={p}" for c in (0, 0.05, 0.1, 0.2) for p in (1, 2)}
    assert (out / "mismatch_sweep.png").exists()


def test_eval_checkpoint(tmp_path):
    cfg = _cfg(tmp_path)
    main(["train", "--config", cfg, "--out-dir", str(tmp_path / "run"), "--seed-list", "0"])
    ckpt = tmp_path / "run" / "metrics_seed0_weights.txt"
    assert main(["eval", "--config", cfg, "--out-dir", str(tmp_path / "ev"), str(ckpt)]) == 0
    doc = json.loads((tmp_path / "ev" / "eval_metrics_seed0_weights.json").read_text())
    summary = json.loads((tmp_path / "run" / "summary.json").read_text())
    assert doc["test"]["accuracy"] == summary["per_seed"]["0"]["test"]["accuracy"]


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[training]\nsteps = 3\n")
    assert main(["train", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert "bad.ini:2" in capsys.readouterr().err
    assert main(["sweep-mismatch", "--config", _cfg(tmp_path), "--out-dir", str(tmp_path), "--cv-list", ""]) == 2


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "fbsnn", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "sweep-mismatch" in r.stdout
