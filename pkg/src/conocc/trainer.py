"""Joint autoencoder + hypersphere-center training loop."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import engine as E
from .data import MAJORITY, Sample, stack
from .engine import Tensor
from .losses import HypersphereCenter, LossReport, constraining_loss, reconstruction_loss, total_loss
from .model import AutoencoderModel, ConfigError, decode, encode

MODES = ("joint", "alternating")


@dataclass(frozen=True)
class HyperParams:
    """Training settings; defaults are the standard ConOCC configuration.

    ``lr`` is the learning rate, ``gamma`` weights the constraining loss,
    ``T`` is the center update interval in epochs and ``b`` the batch size.
    """

    lr: float = 1e-3
    gamma: float = 10.0
    T: int = 60
    b: int = 128
    epochs: int = 1000
    n: int = 256
    seed: int = 0
    mode: str = "joint"

    def validate(self) -> None:
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be > 0, got {self.lr}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        for name in ("T", "b", "epochs", "n"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")

    def with_(self, **kw) -> "HyperParams":
        return replace(self, **kw)


@dataclass
class EpochRecord:
    epoch: int
    l_ae: float
    l_con: float
    l_total: float
    seconds: float
    center_updated: bool


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)
    center_history: list[HypersphereCenter] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def update_epochs(self) -> list[int]:
        return [r.epoch for r in self.records if r.center_updated]

    def to_csv(self, path) -> None:
        """Deterministic per-epoch losses; wall-clock times go to :meth:`to_timing_log`."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("epoch,l_ae,l_con,l_total,center_updated\n")
            for r in self.records:
                fh.write(f"{r.epoch},{r.l_ae!r},{r.l_con!r},{r.l_total!r},{int(r.center_updated)}\n")

    def to_timing_log(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("epoch,seconds\n")
            for r in self.records:
                fh.write(f"{r.epoch},{r.seconds:.6f}\n")


def _check_train_set(train_set: Sequence[Sample], m: int) -> np.ndarray:
    if not train_set:
        raise ValueError("training set is empty")
    for s in train_set:
        if s.pixels.shape != (m, m):
            raise ValueError(f"{s.sample_id}: expected {m}x{m} pixels, got {s.pixels.shape}")
        if s.label != MAJORITY:
            raise ValueError(f"{s.sample_id}: training samples must be majority-class")
    return stack(train_set)


def encode_all(model: AutoencoderModel, x: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Forward-only features for an [N,1,m,m] array, in fixed-size chunks."""
    return np.concatenate([encode(model, x[i:i + chunk]).data for i in range(0, len(x), chunk)])


def update_center(model: AutoencoderModel, train_set, epoch: int = 0) -> HypersphereCenter:
    """Mean bottleneck vector of the whole training set under the current weights."""
    x = train_set if isinstance(train_set, np.ndarray) else (stack(train_set) if len(train_set) else None)
    if x is None or len(x) == 0:
        raise ValueError("cannot compute a center from an empty training set")
    z = encode_all(model, x)
    mu = z.astype(np.float64).mean(axis=0).astype(z.dtype)
    return HypersphereCenter(mu, epoch)


def train_step(model: AutoencoderModel, params: Sequence[Tensor], batch: np.ndarray,
               loss_fn: Callable[[AutoencoderModel, Tensor], tuple[Tensor, Tensor, Tensor]],
               gamma: float) -> tuple[LossReport, dict[Tensor, np.ndarray]]:
    """Forward, loss and backward for one mini-batch; no parameter update."""
    with E.GradTape() as tape:
        l_ae, l_con, loss = loss_fn(model, Tensor(batch, dtype=batch.dtype))
    grads = E.backward(tape, loss, params)
    return LossReport(l_ae.item(), l_con.item(), loss.item(), gamma), grads


def conocc_loss(center: HypersphereCenter | None, gamma: float):
    """Loss closure returning (L_AE, L_con, L_AE + gamma * L_con)."""
    def fn(model: AutoencoderModel, x: Tensor):
        z = encode(model, x)
        l_ae = reconstruction_loss(decode(model, z), x)
        l_con = constraining_loss(z, center) if center is not None else Tensor(0.0, dtype=x.data.dtype)
        return l_ae, l_con, total_loss(l_ae, l_con, gamma)
    return fn


def run_epochs(model: AutoencoderModel, train_set: Sequence[Sample], hp: HyperParams, *,
               params: Sequence[Tensor], make_loss: Callable[[HypersphereCenter | None], Callable],
               refresh_center: Callable[[int], bool],
               on_epoch: Callable | None = None,
               constrain_phase: Callable[[HypersphereCenter | None], Callable] | None = None,
               ) -> tuple[AutoencoderModel, HypersphereCenter | None, TrainLog]:
    """Shared mini-batch loop used by ConOCC and every baseline.

    ``refresh_center(epoch)`` decides whether mu is recomputed before that
    (0-based) epoch; a ``False`` at epoch 0 means no center is kept.
    """
    hp.validate()
    x_all = _check_train_set(train_set, model.m)
    rng = np.random.default_rng(hp.seed)
    state = E.AdamState.for_params(params)
    log = TrainLog()
    center: HypersphereCenter | None = None
    n = len(x_all)
    for epoch in range(hp.epochs):
        t0 = time.perf_counter()
        updated = refresh_center(epoch)
        if updated:
            if constrain_phase is not None and center is not None:
                _one_pass(model, x_all, rng, hp, params, state, constrain_phase(center), hp.gamma)
            center = update_center(model, x_all, epoch)
            log.center_history.append(center)
        loss_fn = make_loss(center)
        sums = np.zeros(3)
        order = rng.permutation(n)
        for start in range(0, n, hp.b):
            batch = x_all[order[start:start + hp.b]]
            rep, grads = train_step(model, params, batch, loss_fn, hp.gamma)
            E.adam_step(params, [grads[p] for p in params], state, hp.lr)
            sums += len(batch) * np.array([rep.l_ae, rep.l_con, rep.l_total])
        sums /= n
        log.records.append(EpochRecord(epoch, *map(float, sums), time.perf_counter() - t0, updated))
        if on_epoch is not None:
            on_epoch(epoch, model, center, log)
    return model, center, log


def _one_pass(model, x_all, rng, hp, params, state, loss_fn, gamma) -> None:
    order = rng.permutation(len(x_all))
    for start in range(0, len(x_all), hp.b):
        _, grads = train_step(model, params, x_all[order[start:start + hp.b]], loss_fn, gamma)
        E.adam_step(params, [grads[p] for p in params], state, hp.lr)


def _constraint_only(gamma: float):
    def make(center):
        def fn(model, x):
            l_con = constraining_loss(encode(model, x), center)
            return Tensor(0.0, dtype=x.data.dtype), l_con, E.scale(l_con, gamma)
        return fn
    return make


def fit(model: AutoencoderModel, train_set: Sequence[Sample], hp: HyperParams = HyperParams(),
        on_epoch: Callable | None = None, keep_center: bool = True,
        ) -> tuple[AutoencoderModel, HypersphereCenter | None, TrainLog]:
    """Train ``model`` in place and return it with its final center and log.

    mu is recomputed from the full training set before the first epoch and
    after every ``hp.T`` epochs; between refreshes it is a constant. In the
    default ``joint`` mode every mini-batch minimizes L_AE + gamma * L_con.
    The ``alternating`` mode optimizes L_AE alone and, at each refresh, runs
    one extra pass of the constraining loss on the encoder.
    """
    hp.validate()
    if hp.n != model.n:
        raise ConfigError(f"hyperparameter n={hp.n} does not match model bottleneck {model.n}")
    alternating = hp.mode == "alternating"
    gamma = 0.0 if alternating else hp.gamma
    refresh = (lambda e: e % hp.T == 0) if keep_center else (lambda e: False)
    return run_epochs(
        model, train_set, hp,
        params=model.parameters(),
        make_loss=lambda c: conocc_loss(c, gamma),
        refresh_center=refresh,
        on_epoch=on_epoch,
        constrain_phase=_constraint_only(hp.gamma) if alternating and hp.gamma > 0 else None,
    )


def compactness(model: AutoencoderModel, samples, center: np.ndarray | None = None) -> float:
    """Mean squared distance of bottleneck features to ``center`` (default: their mean)."""
    x = samples if isinstance(samples, np.ndarray) else stack(samples)
    z = encode_all(model, x).astype(np.float64)
    mu = z.mean(axis=0) if center is None else np.asarray(center, dtype=np.float64)
    return float(((z - mu) ** 2).sum(axis=1).mean())
