"""Two-component PCA of bottleneck features and a static SVG scatter."""
from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .data import MAJORITY, Sample, stack
from .model import AutoencoderModel
from .trainer import encode_all


def principal_components(x: np.ndarray, k: int = 2, tol: float = 1e-8, max_iter: int = 1000,
                         ) -> tuple[np.ndarray, np.ndarray, float]:
    """Leading eigenvectors of the covariance of ``x`` by power iteration with deflation.

    Returns:
        components: [k, d] unit vectors, each with its largest-magnitude entry positive.
        variances: [k] eigenvalues (population covariance).
        total: trace of the covariance.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or len(x) < 3:
        raise ValueError(f"need at least 3 feature vectors, got shape {x.shape}")
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / len(xc)
    total = float(np.trace(cov))
    d = cov.shape[0]
    comps, vals = [], []
    start = np.random.default_rng(0).standard_normal(d)
    for _ in range(min(k, d)):
        v = start / np.linalg.norm(start)
        for _ in range(max_iter):
            w = cov @ v
            norm = np.linalg.norm(w)
            if norm <= 1e-300:
                break
            w /= norm
            done = min(np.linalg.norm(w - v), np.linalg.norm(w + v)) < tol
            v = w
            if done:
                break
        lam = float(v @ cov @ v)
        v = v * np.sign(v[np.argmax(np.abs(v))])
        comps.append(v)
        vals.append(max(lam, 0.0))
        cov = cov - lam * np.outer(v, v)
    return np.array(comps), np.array(vals), total


def project(features: np.ndarray, k: int = 2) -> tuple[np.ndarray, np.ndarray, float]:
    """Mean-centered features projected on the top ``k`` components."""
    comps, vals, total = principal_components(features, k)
    xc = np.asarray(features, dtype=np.float64)
    xc = xc - xc.mean(axis=0)
    return xc @ comps.T, vals, total


def feature_projection(model: AutoencoderModel, samples: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray, float]:
    return project(encode_all(model, stack(samples)))


def write_projection_csv(path, samples: Sequence[Sample], coords: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("sample_id,pc1,pc2,label\n")
        for s, (a, b) in zip(samples, coords):
            fh.write(f"{s.sample_id},{float(a)!r},{float(b)!r},{s.label}\n")


def scatter_svg(coords: np.ndarray, labels: Sequence[str], title: str = "", size: int = 480) -> str:
    """Static SVG scatter; majority points blue, minority orange."""
    pad = 40
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    inner = size - 2 * pad
    pts = pad + (coords - lo) / span * inner
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
        f'<rect x="{pad}" y="{pad}" width="{inner}" height="{inner}" fill="none" stroke="#888"/>',
        f'<text x="{size / 2:.1f}" y="{pad / 2 + 5:.1f}" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<text x="{size / 2:.1f}" y="{size - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">PC1</text>',
        f'<text x="12" y="{size / 2:.1f}" font-family="sans-serif" font-size="12" transform="rotate(-90 12 {size / 2:.1f})">PC2</text>',
    ]
    for (px, py), lab in zip(pts, labels):
        color = "#1f77b4" if lab == MAJORITY else "#ff7f0e"
        out.append(f'<circle cx="{px:.2f}" cy="{size - py:.2f}" r="2.5" fill="{color}" fill-opacity="0.7"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
