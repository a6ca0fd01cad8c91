"""Grid over learning rate, constraint weight and center interval."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .baselines import MethodSpec, train_method
from .data import Sample
from .model import ArchConfig, ConfigError
from .scoring import auc

DEFAULT_LAMBDAS = (1e-3, 1e-4)
DEFAULT_GAMMAS = (1e-2, 1e-1, 1.0, 10.0)
DEFAULT_INTERVALS = (20, 40, 60, 80, 100)


@dataclass(frozen=True)
class SweepCell:
    lr: float
    gamma: float
    T: int | None
    method: str

    @property
    def is_reference(self) -> bool:
        return self.method == "cae"


@dataclass(frozen=True)
class SweepRow:
    cell: SweepCell
    auc: float
    status: str
    repeats: int


def grid(lambdas: Sequence[float], gammas: Sequence[float], intervals: Sequence[int]) -> list[SweepCell]:
    """Cells in output order: per learning rate, the CAE reference then gamma x T."""
    if not lambdas or not gammas or not intervals:
        raise ConfigError("sweep grid is empty")
    cells = []
    for lr in lambdas:
        cells.append(SweepCell(lr, 0.0, None, "cae"))
        cells.extend(SweepCell(lr, g, t, "conocc") for g in gammas for t in intervals)
    return cells


def run_cell(cell: SweepCell, train: Sequence[Sample], test: Sequence[Sample], epochs: int, batch: int,
             seed: int, repeats: int = 1, arch: ArchConfig | None = None, n: int = 256) -> SweepRow:
    aucs = []
    status = "ok"
    for r in range(repeats):
        overrides = dict(lr=cell.lr, epochs=epochs, b=batch, seed=seed + r, n=n)
        if cell.is_reference:
            spec = MethodSpec.default("cae", **overrides)
        else:
            spec = MethodSpec.default("conocc", gamma=cell.gamma, T=cell.T, **overrides)
        cell_arch = None if arch is None else ArchConfig(arch.m, arch.n, arch.channels, seed + r)
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                trained = train_method(spec, train, cell_arch)
                scores = trained.score(test)
        except (FloatingPointError, OverflowError):
            status = "diverged"
            continue
        last = trained.log.records[-1].l_total
        if not math.isfinite(last) or not all(math.isfinite(s.score) for s in scores):
            status = "diverged"
            continue
        aucs.append(auc(scores))
    value = float(np.mean(aucs)) if aucs else float("nan")
    return SweepRow(cell, value, status if aucs else "diverged", repeats)


def run_sweep(train: Sequence[Sample], test: Sequence[Sample], *, lambdas=DEFAULT_LAMBDAS,
              gammas=DEFAULT_GAMMAS, intervals=DEFAULT_INTERVALS, epochs: int = 1000, batch: int = 128,
              seed: int = 0, repeats: int = 1, workers: int = 1, arch: ArchConfig | None = None,
              n: int = 256) -> list[SweepRow]:
    """Every grid cell, returned in grid order whatever the worker count."""
    cells = grid(lambdas, gammas, intervals)
    args = [(c, train, test, epochs, batch, seed, repeats, arch, n) for c in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_cell, *zip(*args)))
    return [run_cell(*a) for a in args]


def write_grid_csv(path, rows: Sequence[SweepRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("lambda,gamma,T,method,auc,status,repeats\n")
        for r in rows:
            c = r.cell
            t = "" if c.T is None else str(c.T)
            fh.write(f"{c.lr!r},{c.gamma!r},{t},{c.method},{r.auc!r},{r.status},{r.repeats}\n")
