"""Command line: synth | train | eval | crossval | sweep | project.

Settings resolve in three layers: built-in defaults, then a ``key = value``
config file (``--config``), then explicit flags. Relative ``--out`` paths are
placed under ``$CONOCC_OUTPUT_ROOT`` when that variable is set.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import METHODS, MethodSpec, TrainedMethod, train_method
from .data import (MAJORITY, MINORITY, DataError, DatasetManifest, load_dataset, synthesize_dataset,
                   write_dataset)
from .evaluation import cross_validate, format_table, write_crossval_csv, write_metrics_csv
from .losses import HypersphereCenter
from .model import ArchConfig, ConfigError, load_checkpoint, save_checkpoint
from .projection import feature_projection, scatter_svg, write_projection_csv
from .scoring import MetricError, evaluate, read_scores_csv, write_scores_csv
from .sweep import DEFAULT_GAMMAS, DEFAULT_INTERVALS, DEFAULT_LAMBDAS, run_sweep, write_grid_csv
from .trainer import HyperParams, TrainLog, compactness

log = logging.getLogger("conocc")

OUTPUT_ROOT_ENV = "CONOCC_OUTPUT_ROOT"
DEFAULTS = HyperParams()

# flag name -> (type, default, help)
HP_FLAGS = {
    "lambda": (float, None, f"learning rate; default {DEFAULTS.lr:g} (1e-4 for --method cae)"),
    "gamma": (float, None, f"constraining-loss weight; default {DEFAULTS.gamma:g} (1 for --method dsvdd_lite, "
                           "0 for cae/sae)"),
    "interval": (int, DEFAULTS.T, f"center update interval T in epochs (default: {DEFAULTS.T})"),
    "batch": (int, DEFAULTS.b, f"mini-batch size (default: {DEFAULTS.b})"),
    "epochs": (int, DEFAULTS.epochs, f"training epochs, last epoch is kept (default: {DEFAULTS.epochs})"),
    "n": (int, DEFAULTS.n, f"bottleneck width (default: {DEFAULTS.n})"),
    "seed": (int, 0, "seed for weights and shuffling (default: 0)"),
    "rho": (float, 0.01, "SAE sparsity weight, used by --method sae (default: 0.01)"),
    "mode": (str, "joint", "joint | alternating center/AE schedule (default: joint)"),
}
SYNTH_FLAGS = {
    "m": (int, 32, "patch size (default: 32)"),
    "train": (int, 1000, "majority training patches (default: 1000)"),
    "test-maj": (int, 946, "majority test patches (default: 946)"),
    "test-min": (int, 926, "minority test patches (default: 926)"),
    "sep": (float, 1.0, "class separability in [0,1] (default: 1.0)"),
    "seed": (int, 0, "generator seed (default: 0)"),
}
DATA_FLAGS = {
    "data": (str, None, "manifest.csv path, or 'synth:train=200,test_maj=50,test_min=50,sep=1,seed=0'"),
    "m": (int, 32, "patch size images are resized to (default: 32)"),
    "resize": (str, "bilinear", "none | nearest | bilinear (default: bilinear)"),
}


def read_config(path) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _add_flags(p: argparse.ArgumentParser, flags: dict) -> None:
    for name, (typ, _, help_) in flags.items():
        p.add_argument(f"--{name}", type=typ, default=None, help=help_)


def _resolve(args: argparse.Namespace, flags: dict) -> None:
    """Fill flags left unset from the config file, then from defaults."""
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    for name, (typ, default, _) in flags.items():
        key = name.replace("-", "_")
        if getattr(args, key) is None:
            setattr(args, key, typ(cfg[key]) if key in cfg else default)


def _out_dir(args, command: str) -> Path:
    out = Path(args.out) if args.out else Path("runs") / command
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def _parse_synth(spec: str) -> dict:
    keys = {"m": int, "train": int, "test_maj": int, "test_min": int, "sep": float, "seed": int}
    vals: dict = {}
    body = spec.split(":", 1)[1]
    for part in filter(None, body.split(",")):
        k, _, v = part.partition("=")
        k = k.strip().replace("-", "_")
        if k not in keys:
            raise ConfigError(f"unknown synth parameter {k!r}")
        vals[k] = keys[k](v)
    return vals


def load_source(data: str | None, m: int, resize: str):
    if not data:
        raise ConfigError("--data is required")
    if data.startswith("synth:"):
        kw = _parse_synth(data)
        return synthesize_dataset(kw.get("m", m), kw.get("train", 200), kw.get("test_maj", 50),
                                  kw.get("test_min", 50), kw.get("sep", 1.0), kw.get("seed", 0))
    path = Path(data)
    if path.is_dir():
        path = path / "manifest.csv"
    if not path.is_file():
        raise DataError(f"{path}: manifest not found")
    return load_dataset(DatasetManifest.read(path, m, resize))


def method_spec(args) -> MethodSpec:
    method = args.method
    overrides = dict(T=args.interval, b=args.batch, epochs=args.epochs, n=args.n, seed=args.seed, mode=args.mode)
    if args.__dict__.get("lambda") is not None:
        overrides["lr"] = args.__dict__["lambda"]
    if args.gamma is not None:
        overrides["gamma"] = args.gamma
    if method in ("cae", "sae"):
        overrides["gamma"] = 0.0
    spec = MethodSpec.default(method, **overrides)
    if method == "sae":
        spec = MethodSpec("sae", spec.hp, args.rho)
    spec.validate()
    return spec


def _config_lines(spec: MethodSpec, extra: dict) -> str:
    hp = spec.hp
    rows = {"method": spec.method, "lambda": repr(hp.lr), "gamma": repr(hp.gamma), "interval": hp.T,
            "batch": hp.b, "epochs": hp.epochs, "n": hp.n, "seed": hp.seed, "mode": hp.mode}
    if spec.rho is not None:
        rows["rho"] = repr(spec.rho)
    rows.update(extra)
    return "".join(f"{k} = {v}\n" for k, v in rows.items())


def save_trained(trained: TrainedMethod, path) -> None:
    extra = {"meta.method": np.array([METHODS.index(trained.method)], dtype=np.float32)}
    if trained.center is not None:
        extra["center.mu"] = trained.center.mu
        extra["center.epoch"] = np.array([trained.center.updated_at_epoch], dtype=np.float32)
    save_checkpoint(trained.model, path, extra)


def load_trained(path) -> TrainedMethod:
    model, extra = load_checkpoint(path)
    method = METHODS[int(extra.get("meta.method", np.array([0]))[0])]
    center = None
    if "center.mu" in extra:
        center = HypersphereCenter(extra["center.mu"], int(extra.get("center.epoch", np.array([0]))[0]))
    return TrainedMethod(method, model, center, TrainLog())


# -- commands ------------------------------------------------------------------

def cmd_synth(args) -> int:
    _resolve(args, SYNTH_FLAGS)
    out = _out_dir(args, "synth")
    train, test = synthesize_dataset(args.m, args.train, args.test_maj, args.test_min, args.sep, args.seed)
    manifest = write_dataset(out, train, test)
    print(f"wrote {len(train) + len(test)} images and {manifest}")
    return 0


def cmd_train(args) -> int:
    _resolve(args, {**HP_FLAGS, **DATA_FLAGS})
    spec = method_spec(args)
    out = _out_dir(args, "train")
    train, _ = load_source(args.data, args.m, args.resize)
    arch = ArchConfig(m=args.m if not train else train[0].m, n=spec.hp.n, seed=spec.hp.seed)
    arch.validate()
    (out / "config.txt").write_text(_config_lines(spec, {"data": args.data, "m": arch.m, "resize": args.resize}),
                                    encoding="utf-8")
    every = args.checkpoint_every

    def on_epoch(epoch, model, center, tlog):
        if every and (epoch + 1) % every == 0 and epoch + 1 < spec.hp.epochs:
            save_trained(TrainedMethod(spec.method, model, center, tlog), out / f"model_epoch{epoch + 1:05d}.ckpt")
        if (epoch + 1) % max(1, spec.hp.epochs // 10) == 0:
            r = tlog.records[-1]
            log.info("epoch %d  l_ae=%.4f  l_con=%.4f  l_total=%.4f", epoch + 1, r.l_ae, r.l_con, r.l_total)

    trained = train_method(spec, train, arch, on_epoch=on_epoch)
    save_trained(trained, out / "model.ckpt")
    trained.log.to_csv(out / "train_log.csv")
    trained.log.to_timing_log(out / "timing.log")
    last = trained.log.records[-1]
    print(f"{spec.method}: {spec.hp.epochs} epochs, final l_ae={last.l_ae:.4f} l_con={last.l_con:.4f} "
          f"l_total={last.l_total:.4f} -> {out / 'model.ckpt'}")
    return 0


def cmd_eval(args) -> int:
    _resolve(args, DATA_FLAGS)
    out = _out_dir(args, "eval")
    if args.scores:
        scores = read_scores_csv(args.scores)
        method = args.method or "scores"
    else:
        if not args.checkpoint:
            raise ConfigError("eval needs --checkpoint or --scores")
        trained = load_trained(args.checkpoint)
        _, test = load_source(args.data, trained.model.m, args.resize)
        scores = trained.score(test)
        method = args.method or trained.method
        write_scores_csv(out / "scores.csv", scores)
    metrics = evaluate(scores)
    write_metrics_csv(out / "metrics.csv", [(method, "0", metrics)])
    print(format_table([(method, "0", np.array(metrics.as_row()), None)]))
    return 0


def cmd_crossval(args) -> int:
    _resolve(args, {**HP_FLAGS, **DATA_FLAGS})
    out = _out_dir(args, "crossval")
    train, test = load_source(args.data, args.m, args.resize)
    majority = list(train) + [s for s in test if s.label == MAJORITY]
    minority = [s for s in test if s.label == MINORITY]
    results, rows = [], []
    for method in args.methods.split(","):
        args.method = method.strip()
        spec = method_spec(args)
        arch = ArchConfig(m=majority[0].m, n=spec.hp.n, seed=spec.hp.seed)
        res = cross_validate(majority, minority, args.k, spec, arch, seed=args.fold_seed)
        results.append(res)
        rows += [(res.method, str(f.fold), np.array(f.metrics.as_row()), None) for f in res.folds]
        rows.append((res.method, "mean", res.mean, res.std))
    write_crossval_csv(out / "metrics.csv", results)
    print(format_table(rows))
    return 0


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args) -> int:
    _resolve(args, {**DATA_FLAGS, "epochs": HP_FLAGS["epochs"], "batch": HP_FLAGS["batch"],
                    "seed": HP_FLAGS["seed"], "n": HP_FLAGS["n"]})
    out = _out_dir(args, "sweep")
    train, test = load_source(args.data, args.m, args.resize)
    lambdas, gammas = _floats(args.lambdas), _floats(args.gammas)
    intervals = [int(v) for v in _floats(args.intervals)]
    arch = ArchConfig(m=train[0].m, n=args.n, seed=args.seed)
    rows = run_sweep(train, test, lambdas=lambdas, gammas=gammas, intervals=intervals, epochs=args.epochs,
                     batch=args.batch, seed=args.seed, repeats=args.repeats, workers=args.workers, arch=arch,
                     n=args.n)
    write_grid_csv(out / "grid.csv", rows)
    for r in rows:
        t = "-" if r.cell.T is None else r.cell.T
        print(f"{r.cell.method:<7} lambda={r.cell.lr:<8g} gamma={r.cell.gamma:<6g} T={t!s:<4} auc={r.auc:.4f} {r.status}")
    return 0


def cmd_project(args) -> int:
    _resolve(args, DATA_FLAGS)
    out = _out_dir(args, "project")
    trained = load_trained(args.checkpoint)
    train, test = load_source(args.data, trained.model.m, args.resize)
    samples = {"train": train, "test": test, "all": list(train) + list(test)}[args.split]
    if len(samples) < 3:
        raise DataError("projection needs at least 3 samples")
    coords, variances, total = feature_projection(trained.model, samples)
    write_projection_csv(out / "features_2d.csv", samples, coords)
    title = f"{trained.method}: top-2 PCA of bottleneck features"
    (out / "scatter.svg").write_text(scatter_svg(coords, [s.label for s in samples], title), encoding="utf-8")
    comp = compactness(trained.model, samples)
    print(f"explained variance: pc1={variances[0] / total:.4f} pc2={variances[1] / total:.4f}")
    print(f"compactness (mean squared distance to feature mean): {comp:.6g}")
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conocc", description="Constrained one-class classification toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value settings file; explicit flags take precedence")
        p.add_argument("--out", help=f"output directory (default: runs/<command>, under ${OUTPUT_ROOT_ENV} if set)")

    p = sub.add_parser("synth", help="write a synthetic PGM dataset with manifest")
    common(p)
    _add_flags(p, SYNTH_FLAGS)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train ConOCC or a baseline; writes model.ckpt, train_log.csv and timing.log")
    common(p)
    _add_flags(p, DATA_FLAGS)
    p.add_argument("--method", choices=METHODS, default="conocc", help="method to train (default: conocc)")
    _add_flags(p, HP_FLAGS)
    p.add_argument("--checkpoint-every", type=int, default=0, help="also checkpoint every K epochs (default: 0, off)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score the test split; writes scores.csv and metrics.csv")
    common(p)
    _add_flags(p, DATA_FLAGS)
    p.add_argument("--checkpoint", help="model.ckpt written by train")
    p.add_argument("--scores", help="evaluate an existing scores.csv instead of a checkpoint")
    p.add_argument("--method", default=None, help="method label for the metrics row (default: from checkpoint)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("crossval", help="majority-rotating k-fold evaluation")
    common(p)
    _add_flags(p, DATA_FLAGS)
    p.add_argument("--k", type=int, default=2, help="number of majority rotations (default: 2)")
    p.add_argument("--methods", default="conocc", help=f"comma-separated subset of {','.join(METHODS)} (default: conocc)")
    p.add_argument("--fold-seed", type=int, default=0, help="seed of the majority split (default: 0)")
    _add_flags(p, HP_FLAGS)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("sweep", help="AUC over a lambda x gamma x T grid plus CAE references")
    common(p)
    _add_flags(p, DATA_FLAGS)
    p.add_argument("--lambdas", default=",".join(f"{v:g}" for v in DEFAULT_LAMBDAS), help="learning rates (default: 1e-3,1e-4)")
    p.add_argument("--gammas", default=",".join(f"{v:g}" for v in DEFAULT_GAMMAS), help="gamma values (default: 0.01,0.1,1,10)")
    p.add_argument("--intervals", default=",".join(str(v) for v in DEFAULT_INTERVALS), help="T values (default: 20,40,60,80,100)")
    for name in ("epochs", "batch", "seed", "n"):
        typ, _, help_ = HP_FLAGS[name]
        p.add_argument(f"--{name}", type=typ, default=None, help=help_ + "; lower --epochs for desk-scale runs")
    p.add_argument("--repeats", type=int, default=1, help="runs per cell, AUC averaged (default: 1)")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes (default: 1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("project", help="2-D PCA of bottleneck features as CSV + SVG")
    common(p)
    _add_flags(p, DATA_FLAGS)
    p.add_argument("--checkpoint", required=True, help="model.ckpt written by train")
    p.add_argument("--split", choices=("train", "test", "all"), default="train", help="samples to project (default: train)")
    p.set_defaults(func=cmd_project)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, DataError, MetricError, ValueError, OSError) as exc:
        print(f"conocc {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
