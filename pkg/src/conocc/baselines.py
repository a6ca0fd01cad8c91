"""CAE, sparse AE and a Deep-SVDD style encoder, all on the ConOCC backbone."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import engine as E
from .data import Sample
from .engine import Tensor
from .losses import HypersphereCenter, constraining_loss, reconstruction_loss
from .model import ArchConfig, AutoencoderModel, ConfigError, build_model, decode, encode
from .scoring import AnomalyScore, distance_scores, reconstruction_scores
from .trainer import HyperParams, TrainLog, fit, run_epochs

METHODS = ("conocc", "cae", "sae", "dsvdd_lite")

# CAE's best learning rate in the original comparison was 1e-4
DEFAULT_HP = {
    "conocc": HyperParams(),
    "cae": HyperParams(lr=1e-4, gamma=0.0),
    "sae": HyperParams(lr=1e-3, gamma=0.0),
    "dsvdd_lite": HyperParams(lr=1e-3, gamma=1.0),
}
DEFAULT_RHO = 0.01


@dataclass(frozen=True)
class MethodSpec:
    method: str = "conocc"
    hp: HyperParams = field(default_factory=HyperParams)
    rho: float | None = None

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if (self.method == "sae") != (self.rho is not None):
            raise ConfigError("rho is required for sae and only for sae")
        if self.rho is not None and self.rho < 0:
            raise ConfigError(f"rho must be >= 0, got {self.rho}")
        self.hp.validate()

    @classmethod
    def default(cls, method: str, **hp_overrides) -> "MethodSpec":
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
        hp = DEFAULT_HP[method].with_(**hp_overrides)
        return cls(method, hp, DEFAULT_RHO if method == "sae" else None)


@dataclass
class TrainedMethod:
    method: str
    model: AutoencoderModel
    center: HypersphereCenter | None
    log: TrainLog

    def score(self, samples: Sequence[Sample]) -> list[AnomalyScore]:
        if self.method == "dsvdd_lite":
            return distance_scores(self.model, self.center, samples)
        return reconstruction_scores(self.model, samples)


def default_arch(train_set: Sequence[Sample], hp: HyperParams) -> ArchConfig:
    if not train_set:
        raise ValueError("training set is empty")
    return ArchConfig(m=train_set[0].m, n=hp.n, seed=hp.seed)


def train_cae(train_set: Sequence[Sample], hp: HyperParams = DEFAULT_HP["cae"],
              arch: ArchConfig | None = None, on_epoch: Callable | None = None):
    """Plain convolutional autoencoder: ConOCC with the constraint switched off."""
    model = build_model(arch or default_arch(train_set, hp))
    model, _, log = fit(model, train_set, hp.with_(gamma=0.0), on_epoch=on_epoch, keep_center=False)
    return model, log


def sae_loss(rho: float):
    """Reconstruction plus ``rho`` times the mean absolute bottleneck activation."""
    def fn(model: AutoencoderModel, x: Tensor):
        z = encode(model, x)
        l_ae = reconstruction_loss(decode(model, z), x)
        l1 = E.mean(E.abs_(z))
        return l_ae, l1, (E.add(l_ae, E.scale(l1, rho)) if rho else l_ae)
    return fn


def train_sae(train_set: Sequence[Sample], hp: HyperParams = DEFAULT_HP["sae"], rho: float = DEFAULT_RHO,
              arch: ArchConfig | None = None, on_epoch: Callable | None = None):
    if rho < 0:
        raise ConfigError(f"rho must be >= 0, got {rho}")
    model = build_model(arch or default_arch(train_set, hp))
    model, _, log = run_epochs(model, train_set, hp, params=model.parameters(),
                               make_loss=lambda c: sae_loss(rho), refresh_center=lambda e: False,
                               on_epoch=on_epoch)
    return model, log


def _distance_loss(center: HypersphereCenter):
    def fn(model: AutoencoderModel, x: Tensor):
        l_con = constraining_loss(encode(model, x), center)
        return Tensor(0.0, dtype=x.data.dtype), l_con, l_con
    return fn


def train_dsvdd_lite(train_set: Sequence[Sample], hp: HyperParams = DEFAULT_HP["dsvdd_lite"],
                     arch: ArchConfig | None = None, on_epoch: Callable | None = None):
    """Encoder pulled toward a center fixed at initialization; no decoder.

    Nothing stops this objective from collapsing every input onto mu (the
    dense bias alone can reach it); that failure mode is the reason ConOCC
    keeps a decoder.
    """
    model = build_model(arch or default_arch(train_set, hp))
    model.decoder_params = {}
    model, center, log = run_epochs(model, train_set, hp, params=list(model.encoder_params.values()),
                                    make_loss=_distance_loss, refresh_center=lambda e: e == 0,
                                    on_epoch=on_epoch)
    return model, center, log


def train_method(spec: MethodSpec, train_set: Sequence[Sample], arch: ArchConfig | None = None,
                 on_epoch: Callable | None = None) -> TrainedMethod:
    spec.validate()
    arch = arch or default_arch(train_set, spec.hp)
    if spec.method == "conocc":
        model, center, log = fit(build_model(arch), train_set, spec.hp, on_epoch=on_epoch)
        return TrainedMethod("conocc", model, center, log)
    if spec.method == "cae":
        model, log = train_cae(train_set, spec.hp, arch, on_epoch)
        return TrainedMethod("cae", model, None, log)
    if spec.method == "sae":
        model, log = train_sae(train_set, spec.hp, spec.rho, arch, on_epoch)
        return TrainedMethod("sae", model, None, log)
    model, center, log = train_dsvdd_lite(train_set, spec.hp, arch, on_epoch)
    return TrainedMethod("dsvdd_lite", model, center, log)
