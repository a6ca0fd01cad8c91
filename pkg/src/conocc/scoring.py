"""Anomaly scores and ranking metrics (AUC, AUPR with either class positive)."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import MAJORITY, MINORITY, LABELS, Sample, stack
from .losses import HypersphereCenter
from .model import AutoencoderModel, encode, forward


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class AnomalyScore:
    sample_id: str
    score: float
    true_label: str


@dataclass(frozen=True)
class EvalMetrics:
    auc: float
    aupr_maj: float
    aupr_min: float
    n_majority: int
    n_minority: int

    def as_row(self) -> tuple[float, float, float]:
        return self.auc, self.aupr_maj, self.aupr_min


def _batch(model: AutoencoderModel, samples: Sequence[Sample]) -> np.ndarray:
    for s in samples:
        if s.pixels.shape != (model.m, model.m):
            raise ValueError(f"{s.sample_id}: expected {model.m}x{model.m} pixels, got {s.pixels.shape}")
    return stack(samples)


def reconstruction_scores(model: AutoencoderModel, samples: Sequence[Sample], chunk: int = 256) -> list[AnomalyScore]:
    """Summed squared pixel error of each sample's reconstruction (lower = more normal)."""
    x = _batch(model, samples)
    out = []
    for i in range(0, len(x), chunk):
        xb = x[i:i + chunk]
        diff = forward(model, xb).data.astype(np.float64) - xb
        out.extend((diff ** 2).sum(axis=(1, 2, 3)).tolist())
    return [AnomalyScore(s.sample_id, v, s.label) for s, v in zip(samples, out)]


def distance_scores(model: AutoencoderModel, center: HypersphereCenter | np.ndarray,
                    samples: Sequence[Sample], chunk: int = 256) -> list[AnomalyScore]:
    """Squared distance of each sample's bottleneck feature to the center."""
    mu = np.asarray(center.mu if isinstance(center, HypersphereCenter) else center, dtype=np.float64)
    x = _batch(model, samples)
    out = []
    for i in range(0, len(x), chunk):
        z = encode(model, x[i:i + chunk]).data.astype(np.float64)
        out.extend(((z - mu) ** 2).sum(axis=1).tolist())
    return [AnomalyScore(s.sample_id, v, s.label) for s, v in zip(samples, out)]


def score(model: AutoencoderModel, sample: Sample) -> AnomalyScore:
    return reconstruction_scores(model, [sample])[0]


def score_distance(model: AutoencoderModel, center, sample: Sample) -> AnomalyScore:
    return distance_scores(model, center, [sample])[0]


def _split(scores: Iterable[AnomalyScore]) -> tuple[np.ndarray, np.ndarray]:
    scores = list(scores)
    maj = np.array([s.score for s in scores if s.true_label == MAJORITY], dtype=np.float64)
    mino = np.array([s.score for s in scores if s.true_label == MINORITY], dtype=np.float64)
    if len(maj) == 0 or len(mino) == 0:
        raise MetricError("both majority and minority samples are required")
    return maj, mino


def auc(scores: Iterable[AnomalyScore]) -> float:
    """P(minority score > majority score), ties counting one half."""
    maj, mino = _split(scores)
    srt = np.sort(maj)
    below = np.searchsorted(srt, mino, side="left")
    ties = np.searchsorted(srt, mino, side="right") - below
    wins = below.sum() + 0.5 * ties.sum()
    return float(wins / (len(maj) * len(mino)))


def aupr(scores: Iterable[AnomalyScore], positive_class: str = MINORITY) -> float:
    """Average precision with ``positive_class`` as the relevant class.

    Minority counts as positive for high scores, majority for low scores.
    Tied scores are ordered by sample_id.
    """
    if positive_class not in LABELS:
        raise MetricError(f"positive_class must be one of {LABELS}")
    scores = list(scores)
    _split(scores)
    sign = -1.0 if positive_class == MINORITY else 1.0
    ranked = sorted(scores, key=lambda s: (sign * s.score, s.sample_id))
    hits = np.array([s.true_label == positive_class for s in ranked], dtype=np.float64)
    cum = np.cumsum(hits)
    precision = cum / np.arange(1, len(hits) + 1)
    return float((precision * hits).sum() / hits.sum())


def evaluate(scores: Sequence[AnomalyScore]) -> EvalMetrics:
    maj, mino = _split(scores)
    return EvalMetrics(auc(scores), aupr(scores, MAJORITY), aupr(scores, MINORITY), len(maj), len(mino))


def write_scores_csv(path, scores: Sequence[AnomalyScore]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("sample_id,score,true_label\n")
        for s in scores:
            fh.write(f"{s.sample_id},{s.score!r},{s.true_label}\n")


def read_scores_csv(path) -> list[AnomalyScore]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["sample_id", "score", "true_label"]:
            raise MetricError(f"{path}: expected header sample_id,score,true_label")
        out = []
        for row in reader:
            if row["true_label"] not in LABELS:
                raise MetricError(f"{path}: unknown label {row['true_label']!r}")
            out.append(AnomalyScore(row["sample_id"], float(row["score"]), row["true_label"]))
    return out
