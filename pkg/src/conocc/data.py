"""Grayscale patch datasets: manifest loading, resizing and a synthetic generator."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MAJORITY = "majority"
MINORITY = "minority"
LABELS = (MAJORITY, MINORITY)
RESIZE_POLICIES = ("none", "nearest", "bilinear")


class DataError(ValueError):
    pass


@dataclass
class Sample:
    sample_id: str
    pixels: np.ndarray
    label: str = MAJORITY

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.label not in LABELS:
            raise DataError(f"{self.sample_id}: unknown label {self.label!r}")
        if self.pixels.ndim != 2 or self.pixels.shape[0] != self.pixels.shape[1]:
            raise DataError(f"{self.sample_id}: expected a square 2-D patch, got {self.pixels.shape}")
        if self.pixels.size and (self.pixels.min() < 0 or self.pixels.max() > 1):
            raise DataError(f"{self.sample_id}: pixel values outside [0, 1]")

    @property
    def m(self) -> int:
        return self.pixels.shape[0]


def stack(samples: Sequence[Sample]) -> np.ndarray:
    """[N, 1, m, m] float32 batch."""
    return np.stack([s.pixels for s in samples])[:, None, :, :]


# -- image IO ----------------------------------------------------------------

def _pgm_tokens(raw: bytes, count: int, pos: int) -> tuple[list[bytes], int]:
    toks: list[bytes] = []
    while len(toks) < count:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataError("truncated PGM header")
        toks.append(raw[start:pos])
    return toks, pos


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic = raw[:2]
    if magic not in (b"P2", b"P5"):
        raise DataError(f"{path}: not a PGM file")
    (w, h, maxval), pos = _pgm_tokens(raw, 3, 2)
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise DataError(f"{path}: only 8-bit PGM (maxval 255) is supported, got {maxval}")
    if magic == b"P5":
        body = raw[pos + 1:pos + 1 + w * h]
        if len(body) != w * h:
            raise DataError(f"{path}: truncated pixel data")
        img = np.frombuffer(body, dtype=np.uint8)
    else:
        vals = raw[pos:].split()
        if len(vals) < w * h:
            raise DataError(f"{path}: truncated pixel data")
        img = np.array([int(v) for v in vals[:w * h]], dtype=np.uint8)
    return img.reshape(h, w)


def write_pgm(path, pixels: np.ndarray) -> None:
    """Binary (P5) PGM from values in [0, 1]."""
    img = to_uint8(pixels)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def to_uint8(pixels: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(pixels, dtype=np.float64) * 255), 0, 255).astype(np.uint8)


def read_image(path) -> np.ndarray:
    """8-bit grayscale image as uint8 [H, W]."""
    path = Path(path)
    try:
        head = path.read_bytes()[:8]
    except OSError as exc:
        raise DataError(f"{path}: unreadable ({exc})") from exc
    if head[:2] in (b"P2", b"P5"):
        return read_pgm(path)
    if head.startswith(b"\x89PNG"):
        from PIL import Image

        with Image.open(path) as im:
            if im.mode not in ("L", "P", "1") or (im.mode == "P" and im.palette and im.palette.mode != "L"):
                raise DataError(f"{path}: PNG is not 8-bit grayscale (mode {im.mode})")
            return np.asarray(im.convert("L"), dtype=np.uint8)
    raise DataError(f"{path}: unsupported image format")


# -- resizing ------------------------------------------------------------------

def resize(img: np.ndarray, size: int, policy: str = "bilinear") -> np.ndarray:
    """Resize a 2-D array to ``size`` x ``size`` using pixel-center alignment."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if (h, w) == (size, size) or policy == "none":
        if (h, w) != (size, size):
            raise DataError(f"image is {h}x{w} but resize policy is 'none' and m={size}")
        return img
    if policy not in RESIZE_POLICIES:
        raise DataError(f"unknown resize policy {policy!r}")
    ys = (np.arange(size) + 0.5) * h / size - 0.5
    xs = (np.arange(size) + 0.5) * w / size - 0.5
    if policy == "nearest":
        yi = np.clip(np.floor(ys + 0.5).astype(int), 0, h - 1)
        xi = np.clip(np.floor(xs + 0.5).astype(int), 0, w - 1)
        return img[np.ix_(yi, xi)]
    ys, xs = np.clip(ys, 0, h - 1), np.clip(xs, 0, w - 1)
    y0, x0 = np.floor(ys).astype(int), np.floor(xs).astype(int)
    y1, x1 = np.minimum(y0 + 1, h - 1), np.minimum(x0 + 1, w - 1)
    wy, wx = (ys - y0)[:, None], (xs - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1 - wx) + img[np.ix_(y0, x1)] * wx
    bot = img[np.ix_(y1, x0)] * (1 - wx) + img[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy


# -- manifests -----------------------------------------------------------------

@dataclass
class ManifestEntry:
    split: str
    label: str
    path: str


@dataclass
class DatasetManifest:
    root: Path
    m: int
    entries: list[ManifestEntry] = field(default_factory=list)
    resize: str = "bilinear"

    @classmethod
    def read(cls, path, m: int, resize: str = "bilinear") -> "DatasetManifest":
        path = Path(path)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["split", "label", "relative_path"]:
            raise DataError(f"{path}: manifest header must be 'split,label,relative_path'")
        entries = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            split, label, rel = (c.strip() for c in row)
            if split not in ("train", "test"):
                raise DataError(f"{path}:{lineno}: unknown split {split!r}")
            if label not in LABELS:
                raise DataError(f"{path}:{lineno}: unknown label {label!r}")
            entries.append(ManifestEntry(split, label, rel))
        if resize not in RESIZE_POLICIES:
            raise DataError(f"unknown resize policy {resize!r}")
        return cls(path.parent, m, entries, resize)

    def write(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("split,label,relative_path\n")
            for e in self.entries:
                fh.write(f"{e.split},{e.label},{e.path}\n")


def load_dataset(manifest: DatasetManifest) -> tuple[list[Sample], list[Sample]]:
    """Load train and test samples, each split sorted by relative path."""
    out: dict[str, list[Sample]] = {"train": [], "test": []}
    for e in sorted(manifest.entries, key=lambda e: (e.split, e.path)):
        if e.split == "train" and e.label != MAJORITY:
            raise DataError(f"{e.path}: minority sample in the training split")
        fp = manifest.root / e.path
        if not fp.is_file():
            raise DataError(f"{fp}: file not found")
        img = read_image(fp).astype(np.float64) / 255.0
        pix = np.clip(resize(img, manifest.m, manifest.resize), 0.0, 1.0)
        out[e.split].append(Sample(e.path, pix, e.label))
    return out["train"], out["test"]


# -- synthetic data ------------------------------------------------------------

def _blobs(rng: np.random.Generator, m: int) -> tuple[np.ndarray, np.ndarray]:
    yy, xx = np.mgrid[0:m, 0:m].astype(np.float64)
    img = np.full((m, m), rng.uniform(0.05, 0.15))
    envelope = np.zeros((m, m))
    for _ in range(rng.integers(1, 4)):
        cy, cx = rng.uniform(0.3 * m, 0.7 * m, size=2)
        sigma = rng.uniform(0.08 * m, 0.18 * m)
        g = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma ** 2))
        img += rng.uniform(0.35, 0.75) * g
        envelope = np.maximum(envelope, g)
    return img, envelope


def _perturbation(rng: np.random.Generator, m: int, envelope: np.ndarray) -> np.ndarray:
    yy, xx = np.mgrid[0:m, 0:m].astype(np.float64)
    theta = rng.uniform(0, np.pi)
    period = rng.uniform(2.2, 3.5)
    phase = rng.uniform(0, 2 * np.pi)
    grating = np.sin(2 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / period + phase)
    cy, cx = rng.uniform(0.35 * m, 0.65 * m, size=2)
    radius = rng.uniform(0.15 * m, 0.3 * m)
    ring = np.exp(-((np.hypot(yy - cy, xx - cx) - radius) ** 2) / (2 * 0.8 ** 2))
    return grating * np.clip(envelope * 1.5, 0, 1) + ring


def synthesize_dataset(m: int = 32, n_train: int = 1000, n_test_maj: int = 946, n_test_min: int = 926,
                       separability: float = 1.0, seed: int = 0,
                       noise: float = 0.02) -> tuple[list[Sample], list[Sample]]:
    """Seeded stand-in for a majority/minority patch dataset.

    Majority patches are sums of smooth Gaussian blobs with mild noise.
    Minority patches come from the same generator with an added
    high-frequency grating and a thin ring whose amplitude is
    ``0.3 * separability``; at ``separability=0`` both classes share one
    distribution. Pixels are quantized to 8 bits so a dataset written to
    disk reloads exactly.
    """
    if min(n_train, n_test_maj, n_test_min) < 1:
        raise DataError("all sample counts must be >= 1")
    if m < 8:
        raise DataError(f"m must be >= 8, got {m}")
    if not 0.0 <= separability <= 1.0:
        raise DataError(f"separability must lie in [0, 1], got {separability}")
    rng = np.random.default_rng(seed)
    amp = 0.3 * separability

    def make(label: str) -> np.ndarray:
        img, env = _blobs(rng, m)
        pert = _perturbation(rng, m, env)
        if label == MINORITY:
            img = img + amp * pert
        img = img + rng.normal(0.0, noise, size=(m, m))
        return to_uint8(np.clip(img, 0, 1)).astype(np.float32) / np.float32(255)

    train = [Sample(f"train/maj_{i:05d}", make(MAJORITY), MAJORITY) for i in range(n_train)]
    test = [Sample(f"test/maj_{i:05d}", make(MAJORITY), MAJORITY) for i in range(n_test_maj)]
    test += [Sample(f"test/min_{i:05d}", make(MINORITY), MINORITY) for i in range(n_test_min)]
    return train, test


def write_dataset(root, train: Sequence[Sample], test: Sequence[Sample]) -> Path:
    """Write samples as PGM files plus ``manifest.csv``; returns the manifest path."""
    root = Path(root)
    entries = []
    for split, samples in (("train", train), ("test", test)):
        for s in samples:
            rel = s.sample_id if s.sample_id.endswith(".pgm") else f"{s.sample_id}.pgm"
            fp = root / rel
            fp.parent.mkdir(parents=True, exist_ok=True)
            write_pgm(fp, s.pixels)
            entries.append(ManifestEntry(split, s.label, rel))
    manifest = DatasetManifest(root, train[0].m if train else test[0].m, entries)
    mpath = root / "manifest.csv"
    manifest.write(mpath)
    return mpath


def split_folds(majority: Sequence, k: int, seed: int = 0) -> list[list]:
    """Seeded shuffle of ``majority`` cut into ``k`` near-equal contiguous rotations."""
    if k < 2:
        raise DataError(f"k must be >= 2, got {k}")
    if k > len(majority):
        raise DataError(f"cannot split {len(majority)} samples into {k} folds")
    order = np.random.default_rng(seed).permutation(len(majority))
    return [[majority[i] for i in part] for part in np.array_split(order, k)]
