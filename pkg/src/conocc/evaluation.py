"""Majority-rotating cross-validation and the metrics CSV format."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .baselines import MethodSpec, train_method
from .data import MAJORITY, MINORITY, Sample, split_folds
from .model import ArchConfig, ConfigError
from .scoring import EvalMetrics, evaluate

METRIC_NAMES = ("auc", "aupr_maj", "aupr_min")


@dataclass
class FoldResult:
    fold: int
    train_ids: list[str]
    test_majority_ids: list[str]
    test_minority_ids: list[str]
    metrics: EvalMetrics


@dataclass
class CrossValResult:
    method: str
    folds: list[FoldResult] = field(default_factory=list)

    def values(self) -> np.ndarray:
        return np.array([f.metrics.as_row() for f in self.folds], dtype=np.float64)

    @property
    def mean(self) -> np.ndarray:
        return self.values().mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        v = self.values()
        return v.std(axis=0, ddof=1) if len(v) > 1 else np.zeros(v.shape[1])


def cross_validate(full_majority: Sequence[Sample], full_minority: Sequence[Sample], k: int,
                   spec: MethodSpec, arch: ArchConfig | None = None, seed: int = 0) -> CrossValResult:
    """Train on k-1 majority rotations, test on the held-out one plus every minority sample.

    The minority class never enters training and is identical across folds.
    """
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    if len(full_majority) < 2 * k:
        raise ConfigError(f"{len(full_majority)} majority samples are too few for {k} folds")
    if not full_minority:
        raise ConfigError("cross-validation needs minority samples for testing")
    if any(s.label != MAJORITY for s in full_majority) or any(s.label != MINORITY for s in full_minority):
        raise ConfigError("majority/minority inputs carry the wrong labels")
    rotations = split_folds(list(full_majority), k, seed)
    result = CrossValResult(spec.method)
    for i, held_out in enumerate(rotations):
        train = [s for j, rot in enumerate(rotations) if j != i for s in rot]
        trained = train_method(spec, train, arch)
        metrics = evaluate(trained.score(list(held_out) + list(full_minority)))
        result.folds.append(FoldResult(i, [s.sample_id for s in train], [s.sample_id for s in held_out],
                                       [s.sample_id for s in full_minority], metrics))
    return result


def write_metrics_csv(path, rows: Sequence[tuple[str, str, EvalMetrics]]) -> None:
    """One row per (method, fold) with columns method,fold,auc,aupr_maj,aupr_min."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("method,fold,auc,aupr_maj,aupr_min\n")
        for method, fold, m in rows:
            fh.write(f"{method},{fold},{m.auc!r},{m.aupr_maj!r},{m.aupr_min!r}\n")


def write_crossval_csv(path, results: Sequence[CrossValResult]) -> None:
    """Per-fold rows then a ``mean`` row per method carrying the std columns."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("method,fold,auc,aupr_maj,aupr_min,auc_std,aupr_maj_std,aupr_min_std\n")
        for res in results:
            for f in res.folds:
                a, b, c = f.metrics.as_row()
                fh.write(f"{res.method},{f.fold},{a!r},{b!r},{c!r},,,\n")
            mu, sd = res.mean, res.std
            fh.write(f"{res.method},mean," + ",".join(repr(float(v)) for v in (*mu, *sd)) + "\n")


def format_table(rows: Sequence[tuple[str, str, np.ndarray, np.ndarray | None]]) -> str:
    """Plain-text table of AUC / AUPR-maj / AUPR-min, with +-std when given."""
    lines = [f"{'method':<12}{'fold':<6}{'AUC':>16}{'AUPR-maj':>16}{'AUPR-min':>16}"]
    for method, fold, vals, sds in rows:
        if sds is None:
            cells = "".join(f"{v:>16.4f}" for v in vals)
        else:
            cells = "".join(f"{f'{v:.4f}+-{s:.4f}':>16}" for v, s in zip(vals, sds))
        lines.append(f"{method:<12}{fold:<6}{cells}")
    return "\n".join(lines)
