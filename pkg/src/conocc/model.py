"""Convolutional autoencoder backbone shared by ConOCC and the baselines."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import engine as E
from .engine import Tensor

MAGIC = b"CONOCC1\n"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ArchConfig:
    m: int = 32
    n: int = 256
    channels: tuple[int, ...] = (32, 64, 128)
    seed: int = 0

    def validate(self) -> None:
        blocks = len(self.channels)
        if self.m <= 0 or self.m % (2 ** blocks):
            raise ConfigError(f"image size m={self.m} must be a positive multiple of {2 ** blocks}")
        if self.n < 1:
            raise ConfigError(f"bottleneck width n={self.n} must be >= 1")
        if not self.channels or any(c < 1 for c in self.channels):
            raise ConfigError(f"invalid channel plan {self.channels}")

    @property
    def bottom(self) -> int:
        return self.m // 2 ** len(self.channels)


@dataclass
class AutoencoderModel:
    """Encoder and decoder parameter sets plus the geometry that built them.

    Parameters are ordered dicts of named tensors; encoder names start with
    ``enc.`` and decoder names with ``dec.``.
    """

    cfg: ArchConfig
    encoder_params: dict[str, Tensor] = field(default_factory=dict)
    decoder_params: dict[str, Tensor] = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.cfg.m

    @property
    def n(self) -> int:
        return self.cfg.n

    def parameters(self) -> list[Tensor]:
        return list(self.encoder_params.values()) + list(self.decoder_params.values())

    def named_parameters(self) -> dict[str, Tensor]:
        return {**self.encoder_params, **self.decoder_params}

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "AutoencoderModel":
        def dup(ps):
            return {k: Tensor(v.data.copy(), requires_grad=v.requires_grad, name=k, dtype=v.data.dtype) for k, v in ps.items()}
        return AutoencoderModel(self.cfg, dup(self.encoder_params), dup(self.decoder_params))


def expected_parameter_count(cfg: ArchConfig) -> int:
    """Closed-form parameter count for :func:`build_model`."""
    chans = (1,) + tuple(cfg.channels)
    flat = cfg.channels[-1] * cfg.bottom ** 2
    enc = sum(chans[i + 1] * chans[i] * 9 + chans[i + 1] for i in range(len(cfg.channels)))
    enc += flat * cfg.n + cfg.n
    dec_chans = tuple(reversed(chans))  # (128, 64, 32, 1)
    dec = cfg.n * flat + flat
    dec += sum(dec_chans[i] * dec_chans[i + 1] * 9 + dec_chans[i + 1] for i in range(len(cfg.channels)))
    return enc + dec


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def build_model(cfg: ArchConfig) -> AutoencoderModel:
    """Fresh autoencoder with fan-in scaled uniform weights and zero biases."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    dt = E.get_default_dtype()

    def param(name, arr):
        return Tensor(np.asarray(arr, dtype=dt), requires_grad=True, name=name)

    chans = (1,) + tuple(cfg.channels)
    flat = cfg.channels[-1] * cfg.bottom ** 2
    enc: dict[str, Tensor] = {}
    for i in range(len(cfg.channels)):
        cin, cout = chans[i], chans[i + 1]
        enc[f"enc.conv{i}.kernel"] = param(f"enc.conv{i}.kernel", _uniform(rng, (cout, cin, 3, 3), cin * 9))
        enc[f"enc.conv{i}.bias"] = param(f"enc.conv{i}.bias", np.zeros(cout))
    enc["enc.dense.weight"] = param("enc.dense.weight", _uniform(rng, (flat, cfg.n), flat))
    enc["enc.dense.bias"] = param("enc.dense.bias", np.zeros(cfg.n))

    dec: dict[str, Tensor] = {}
    dec["dec.dense.weight"] = param("dec.dense.weight", _uniform(rng, (cfg.n, flat), cfg.n))
    dec["dec.dense.bias"] = param("dec.dense.bias", np.zeros(flat))
    rchans = tuple(reversed(chans))
    for i in range(len(cfg.channels)):
        cin, cout = rchans[i], rchans[i + 1]
        dec[f"dec.deconv{i}.kernel"] = param(f"dec.deconv{i}.kernel", _uniform(rng, (cin, cout, 3, 3), cin * 9))
        dec[f"dec.deconv{i}.bias"] = param(f"dec.deconv{i}.bias", np.zeros(cout))
    return AutoencoderModel(cfg, enc, dec)


def _as_batch(model: AutoencoderModel, batch) -> Tensor:
    x = batch if isinstance(batch, Tensor) else Tensor(batch)
    m = model.m
    if x.data.ndim == 3:
        x = E.reshape(x, (x.shape[0], 1, m, m)) if x.shape[1:] == (m, m) else x
    if x.data.ndim != 4 or x.shape[1:] != (1, m, m):
        raise E.EngineError(f"expected a batch of shape [N,1,{m},{m}], got {x.shape}")
    return x


def encode(model: AutoencoderModel, batch) -> Tensor:
    """Bottleneck features [N, n] for a batch [N, 1, m, m]."""
    h = _as_batch(model, batch)
    p = model.encoder_params
    for i in range(len(model.cfg.channels)):
        h = E.relu(E.conv2d(h, p[f"enc.conv{i}.kernel"], p[f"enc.conv{i}.bias"], stride=2))
    h = E.reshape(h, (h.shape[0], -1))
    return E.dense(h, p["enc.dense.weight"], p["enc.dense.bias"])


def decode(model: AutoencoderModel, z) -> Tensor:
    """Reconstruction [N, 1, m, m] in (0, 1) from features [N, n]."""
    z = z if isinstance(z, Tensor) else Tensor(z)
    if z.data.ndim != 2 or z.shape[1] != model.n:
        raise E.EngineError(f"expected features of shape [N,{model.n}], got {z.shape}")
    p = model.decoder_params
    b = model.cfg.bottom
    h = E.relu(E.dense(z, p["dec.dense.weight"], p["dec.dense.bias"]))
    h = E.reshape(h, (z.shape[0], model.cfg.channels[-1], b, b))
    last = len(model.cfg.channels) - 1
    for i in range(last + 1):
        h = E.conv2d_transpose(h, p[f"dec.deconv{i}.kernel"], p[f"dec.deconv{i}.bias"], stride=2)
        h = E.sigmoid(h) if i == last else E.relu(h)
    return h


def forward(model: AutoencoderModel, batch) -> Tensor:
    return decode(model, encode(model, batch))


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(model: AutoencoderModel, path, extra: dict[str, np.ndarray] | None = None) -> None:
    """Write named float32 arrays in the CONOCC1 binary layout.

    Architecture metadata travels as a ``meta.arch`` record:
    [m, n, seed, *channels].
    """
    cfg = model.cfg
    records = {"meta.arch": np.array([cfg.m, cfg.n, cfg.seed, *cfg.channels], dtype=np.float32)}
    records.update({k: v.data for k, v in model.named_parameters().items()})
    records.update(extra or {})
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, arr in records.items():
            raw = name.encode("utf-8")
            arr = np.asarray(arr, dtype="<f4")
            fh.write(struct.pack("<Q", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<Q", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr).tobytes())


def read_records(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path}: not a CONOCC1 checkpoint")
    pos = len(MAGIC)
    out: dict[str, np.ndarray] = {}
    while pos < len(data):
        (ln,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        name = data[pos:pos + ln].decode("utf-8")
        pos += ln
        (rank,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        shape = struct.unpack_from(f"<{rank}Q", data, pos)
        pos += 8 * rank
        count = int(np.prod(shape)) if rank else 1
        out[name] = np.frombuffer(data, dtype="<f4", count=count, offset=pos).reshape(shape).astype(np.float32)
        pos += 4 * count
    return out


def load_checkpoint(path) -> tuple[AutoencoderModel, dict[str, np.ndarray]]:
    """Rebuild a model from a checkpoint; returns it with any extra records."""
    recs = read_records(path)
    meta = recs.pop("meta.arch").astype(int).tolist()
    cfg = ArchConfig(m=meta[0], n=meta[1], seed=meta[2], channels=tuple(meta[3:]))
    model = build_model(cfg)
    if not any(k.startswith("dec.") for k in recs):
        model.decoder_params = {}
    for name, t in model.named_parameters().items():
        if name not in recs:
            raise ValueError(f"{path}: missing parameter record {name}")
        arr = recs.pop(name)
        if arr.shape != t.shape:
            raise ValueError(f"{path}: {name} has shape {arr.shape}, expected {t.shape}")
        t.data = arr.astype(t.data.dtype)
    return model, recs
