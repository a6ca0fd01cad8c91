"""
The conocc command line
=======================

Same pipeline as the library demos, driven through ``conocc.cli.main`` so it
runs without the console script installed. Outputs land in one directory.
"""
import sys
import tempfile
from pathlib import Path

from conocc.cli import main

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="conocc_cli_"))


def run(*argv):
    print("$ conocc", " ".join(argv))
    code = main(list(argv))
    print(f"(exit {code})\n")


run("synth", "--out", str(root / "data"), "--train", "60", "--test-maj", "20", "--test-min", "20", "--seed", "5")

# settings file first, explicit flags win
(root / "run.cfg").write_text("epochs = 20\nbatch = 32\nn = 64\ngamma = 1\n")
run("train", "--data", str(root / "data"), "--config", str(root / "run.cfg"), "--gamma", "10",
    "--interval", "5", "--out", str(root / "train"))
print((root / "train" / "config.txt").read_text())

run("eval", "--data", str(root / "data"), "--checkpoint", str(root / "train" / "model.ckpt"), "--out", str(root / "eval"))
run("project", "--data", str(root / "data"), "--checkpoint", str(root / "train" / "model.ckpt"), "--out", str(root / "proj"))

# misuse fails with exit code 2 and a message on stderr
run("train", "--data", str(root / "nowhere"), "--out", str(root / "bad"))
