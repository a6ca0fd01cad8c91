"""Constraining, reconstruction and combined objectives."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine as E
from .engine import Tensor
from .model import ConfigError


@dataclass
class HypersphereCenter:
    mu: np.ndarray
    updated_at_epoch: int = 0

    def __post_init__(self) -> None:
        self.mu = np.asarray(self.mu)
        if self.mu.ndim != 1 or not np.all(np.isfinite(self.mu)):
            raise ValueError("center must be a finite vector")

    @property
    def n(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class LossReport:
    l_ae: float
    l_con: float
    l_total: float
    gamma: float


def constraining_loss(z: Tensor, center: HypersphereCenter | np.ndarray) -> Tensor:
    """Batch mean of squared distances ``||z_i - mu||^2``; mu gets no gradient."""
    mu = center.mu if isinstance(center, HypersphereCenter) else np.asarray(center)
    if z.data.ndim != 2 or z.shape[1] != mu.shape[-1]:
        raise E.EngineError(f"feature width {z.shape} does not match center width {mu.shape}")
    diff = E.sub(z, Tensor(mu, dtype=z.data.dtype))
    return E.mean(E.sum_(E.square(diff), axis=1))


def reconstruction_loss(recon: Tensor, x: Tensor) -> Tensor:
    """Batch mean of per-sample summed squared pixel error."""
    x = x if isinstance(x, Tensor) else Tensor(x, dtype=recon.data.dtype)
    if recon.shape != x.shape:
        raise E.EngineError(f"reconstruction {recon.shape} and input {x.shape} differ in shape")
    per_sample = E.sum_(E.square(E.sub(recon, x)), axis=tuple(range(1, recon.data.ndim)))
    return E.mean(per_sample)


def total_loss(l_ae: Tensor, l_con: Tensor, gamma: float) -> Tensor:
    if gamma < 0:
        raise ConfigError(f"gamma must be non-negative, got {gamma}")
    if gamma == 0:
        return l_ae
    return E.add(l_ae, E.scale(l_con, gamma))


def report(l_ae: Tensor, l_con: Tensor, total: Tensor, gamma: float) -> LossReport:
    return LossReport(l_ae.item(), l_con.item(), total.item(), gamma)
