import hashlib

import numpy as np
import pytest

from conocc.cli import HP_FLAGS, SYNTH_FLAGS, DATA_FLAGS, build_parser, main
from conocc.evaluation import write_metrics_csv
from conocc.scoring import AnomalyScore, evaluate, read_scores_csv, write_scores_csv
from conocc.sweep import grid, DEFAULT_GAMMAS, DEFAULT_INTERVALS, DEFAULT_LAMBDAS

FAST = ["--n", "8", "--epochs", "2", "--batch", "16"]


def digest(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(out), "--m", "16", "--train", "24", "--test-maj", "8",
                 "--test-min", "8", "--seed", "3"]) == 0
    return out


def test_synth_file_count_and_rerun(tmp_path):
    args = ["synth", "--m", "32", "--train", "200", "--test-maj", "50", "--test-min", "50", "--sep", "1.0",
            "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a, b = digest(tmp_path / "a"), digest(tmp_path / "b")
    assert len([k for k in a if k.endswith(".pgm")]) == 300 and "manifest.csv" in a and len(a) == 301
    assert a == b


def test_train_echoes_default_config(tmp_path, dataset):
    out = tmp_path / "run"
    assert main(["train", "--data", str(dataset), "--m", "16", "--epochs", "1", "--out", str(out)]) == 0
    cfg = dict(line.split(" = ") for line in (out / "config.txt").read_text().splitlines())
    assert (cfg["method"], cfg["lambda"], cfg["gamma"], cfg["interval"], cfg["batch"], cfg["n"]) == \
           ("conocc", "0.001", "10.0", "60", "128", "256")
    assert {"model.ckpt", "train_log.csv", "timing.log", "config.txt"} <= {p.name for p in out.iterdir()}


@pytest.mark.parametrize("method, gamma, lr", [("cae", "0.0", "0.0001"), ("sae", "0.0", "0.001"),
                                               ("dsvdd_lite", "1.0", "0.001")])
def test_baseline_methods(tmp_path, dataset, method, gamma, lr):
    out = tmp_path / method
    assert main(["train", "--data", str(dataset), "--m", "16", "--method", method, "--out", str(out)] + FAST) == 0
    cfg = dict(line.split(" = ") for line in (out / "config.txt").read_text().splitlines())
    assert (cfg["gamma"], cfg["lambda"]) == (gamma, lr)
    assert main(["eval", "--data", str(dataset), "--checkpoint", str(out / "model.ckpt"), "--out", str(out)]) == 0
    assert (out / "metrics.csv").read_text().splitlines()[1].startswith(f"{method},0,")


def test_cae_ignores_gamma_flag(tmp_path, dataset):
    out = tmp_path / "cae"
    assert main(["train", "--data", str(dataset), "--m", "16", "--method", "cae", "--gamma", "5",
                 "--out", str(out)] + FAST) == 0
    assert "gamma = 0.0" in (out / "config.txt").read_text()


def test_interrupted_run_is_prefix_of_completed(tmp_path, dataset):
    base = ["train", "--data", str(dataset), "--m", "16", "--n", "8", "--batch", "16", "--interval", "2"]
    assert main(base + ["--epochs", "3", "--out", str(tmp_path / "short")]) == 0
    assert main(base + ["--epochs", "5", "--checkpoint-every", "3", "--out", str(tmp_path / "long")]) == 0
    short, long_ = tmp_path / "short", tmp_path / "long"
    assert (short / "model.ckpt").read_bytes() == (long_ / "model_epoch00003.ckpt").read_bytes()
    assert (short / "model.ckpt").read_bytes() != (long_ / "model.ckpt").read_bytes()
    s_log = (short / "train_log.csv").read_text().splitlines()
    l_log = (long_ / "train_log.csv").read_text().splitlines()
    assert len(s_log) == 4 and len(l_log) == 6 and l_log[:4] == s_log
    s_cfg = (short / "config.txt").read_text().splitlines()
    l_cfg = (long_ / "config.txt").read_text().splitlines()
    assert [a for a, b in zip(s_cfg, l_cfg) if a != b] == ["epochs = 3"]


def test_pipeline_rerun_is_byte_identical(tmp_path, dataset):
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["train", "--data", str(dataset), "--m", "16", "--out", str(out)] + FAST) == 0
        assert main(["eval", "--data", str(dataset), "--checkpoint", str(out / "model.ckpt"), "--out", str(out)]) == 0
    a, b = digest(tmp_path / "a"), digest(tmp_path / "b")
    a.pop("timing.log"), b.pop("timing.log")
    assert a == b


def test_eval_on_separable_scores(tmp_path, capsys):
    scores = [AnomalyScore(f"maj{i}", 0.1 * i, "majority") for i in range(5)]
    scores += [AnomalyScore(f"min{i}", 10 + i, "minority") for i in range(5)]
    write_scores_csv(tmp_path / "s.csv", scores)
    assert main(["eval", "--scores", str(tmp_path / "s.csv"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "metrics.csv").read_text().splitlines()[1] == "scores,0,1.0,1.0,1.0"
    assert "1.0000" in capsys.readouterr().out


def test_eval_matches_library(tmp_path):
    rng = np.random.default_rng(0)
    scores = [AnomalyScore(f"s{i}", float(rng.random()), "minority" if i % 3 else "majority") for i in range(20)]
    write_scores_csv(tmp_path / "s.csv", scores)
    assert main(["eval", "--scores", str(tmp_path / "s.csv"), "--method", "x", "--out", str(tmp_path / "cli")]) == 0
    write_metrics_csv(tmp_path / "lib.csv", [("x", "0", evaluate(read_scores_csv(tmp_path / "s.csv")))])
    assert (tmp_path / "cli" / "metrics.csv").read_bytes() == (tmp_path / "lib.csv").read_bytes()


def test_crossval_rows(tmp_path, dataset):
    assert main(["crossval", "--data", str(dataset), "--m", "16", "--k", "2", "--methods", "conocc,cae",
                 "--out", str(tmp_path)] + FAST) == 0
    rows = [ln.split(",") for ln in (tmp_path / "metrics.csv").read_text().splitlines()[1:]]
    assert [(r[0], r[1]) for r in rows] == [("conocc", "0"), ("conocc", "1"), ("conocc", "mean"),
                                           ("cae", "0"), ("cae", "1"), ("cae", "mean")]
    assert all(r[5] for r in rows if r[1] == "mean")


def test_sweep_default_grid_size():
    cells = grid(DEFAULT_LAMBDAS, DEFAULT_GAMMAS, DEFAULT_INTERVALS)
    assert len(cells) == 42 and sum(c.is_reference for c in cells) == 2


def test_sweep_command(tmp_path, dataset):
    assert main(["sweep", "--data", str(dataset), "--m", "16", "--lambdas", "1e-3", "--gammas", "0.1,1e6",
                 "--intervals", "1", "--out", str(tmp_path)] + FAST) == 0
    lines = (tmp_path / "grid.csv").read_text().splitlines()
    assert lines[0] == "lambda,gamma,T,method,auc,status,repeats"
    assert len(lines) == 4 and lines[1].split(",")[3] == "cae"


def test_sweep_empty_grid(tmp_path, dataset):
    assert main(["sweep", "--data", str(dataset), "--m", "16", "--gammas", "", "--out", str(tmp_path)]) == 2


def test_project_command(tmp_path, dataset, capsys):
    run = tmp_path / "run"
    assert main(["train", "--data", str(dataset), "--m", "16", "--out", str(run)] + FAST) == 0
    assert main(["project", "--data", str(dataset), "--checkpoint", str(run / "model.ckpt"), "--out", str(run)]) == 0
    assert len((run / "features_2d.csv").read_text().splitlines()) == 25
    assert (run / "scatter.svg").read_text().startswith("<svg")
    assert "compactness" in capsys.readouterr().out


def test_help_documents_every_flag(capsys):
    parser = build_parser()
    expected = {"synth": SYNTH_FLAGS, "train": {**HP_FLAGS, **DATA_FLAGS}, "eval": DATA_FLAGS,
                "crossval": {**HP_FLAGS, **DATA_FLAGS}, "project": DATA_FLAGS,
                "sweep": {**DATA_FLAGS, "epochs": 0, "batch": 0, "seed": 0, "n": 0}}
    for cmd, flags in expected.items():
        with pytest.raises(SystemExit):
            parser.parse_args([cmd, "--help"])
        text = capsys.readouterr().out
        for flag in flags:
            assert f"--{flag}" in text, (cmd, flag)
    with pytest.raises(SystemExit):
        parser.parse_args(["train", "--help"])
    text = " ".join(capsys.readouterr().out.split())
    for needle in ("default 0.001", "default 10", "default: 60", "default: 128", "default: 256", "default: 1000"):
        assert needle in text


def test_config_file_precedence(tmp_path, dataset):
    cfg = tmp_path / "c.txt"
    cfg.write_text("gamma = 2.5\nepochs = 1\n# comment\nn = 8\n")
    out = tmp_path / "run"
    assert main(["train", "--data", str(dataset), "--m", "16", "--config", str(cfg), "--gamma", "3",
                 "--out", str(out)]) == 0
    text = (out / "config.txt").read_text()
    assert "gamma = 3.0" in text and "epochs = 1" in text and "n = 8" in text


def test_output_root_env(tmp_path, dataset, monkeypatch):
    monkeypatch.setenv("CONOCC_OUTPUT_ROOT", str(tmp_path))
    assert main(["train", "--data", str(dataset), "--m", "16", "--out", "rel"] + FAST) == 0
    assert (tmp_path / "rel" / "model.ckpt").is_file()


@pytest.mark.parametrize("argv", [
    ["train", "--data", "missing/dir", "--out", "{tmp}"],
    ["train", "--data", "synth:train=4,m=16", "--gamma", "-1", "--out", "{tmp}"],
    ["train", "--data", "synth:bogus=1", "--out", "{tmp}"],
    ["eval", "--out", "{tmp}"],
    ["train", "--out", "{tmp}"],
])
def test_errors_exit_nonzero(tmp_path, argv, capsys):
    assert main([a.replace("{tmp}", str(tmp_path)) for a in argv]) == 2
    assert "error" in capsys.readouterr().err


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["synth", "--out", str(blocker / "sub"), "--train", "2", "--test-maj", "1", "--test-min", "1"]) == 2
