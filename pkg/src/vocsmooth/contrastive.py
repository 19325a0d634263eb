"""Feature maps, Gram matrices and the triplet-style contrastive loss.

Feature maps are ``(C, H, W)`` float arrays.  They come either from the
deterministic Gaussian-derivative filter bank in :func:`extract_features`
or from an FMAP file written by an external tool (:func:`load_features`).

FMAP layout (all little-endian)::

    b"FMAP" | u32 version=1 | u32 C | u32 H | u32 W | C*H*W float32

with the payload in channel-major, row-major order.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import FeatureFormatError, FeatureTruncatedError
from .imaging import gray_plane

FMAP_MAGIC = b"FMAP"
FMAP_VERSION = 1
_HEADER = struct.Struct("<4sIIII")
MAX_ELEMENTS = 2 ** 31 - 1


@dataclass(frozen=True)
class FilterBank:
    """Scales and per-scale kernels of the feature extractor."""

    scales: tuple = (1.0, 2.0, 4.0)
    kernels: tuple = ("gauss", "dx", "dy", "log")
    include_raw: bool = True

    @property
    def channels(self) -> int:
        return len(self.scales) * len(self.kernels) + int(self.include_raw)

    def channel_names(self) -> list:
        names = ["raw"] if self.include_raw else []
        names += [f"{k}@{s:g}" for s in self.scales for k in self.kernels]
        return names


def _derivative_kernels(sigma):
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    g /= g.sum()
    # Correlation kernels: +x g responds positively to increasing ramps.
    d1 = x * g
    d1 /= np.sum(x * d1)  # unit response to a unit-slope ramp
    d2 = (x * x / sigma ** 4 - 1.0 / sigma ** 2) * g
    d2 -= d2.mean()
    d2 /= 0.5 * np.sum(x * x * d2)  # unit response to x^2 / 2
    return g, d1, d2


def _sep(plane, ky, kx):
    tmp = ndimage.correlate1d(plane, ky, axis=0, mode="nearest")
    return ndimage.correlate1d(tmp, kx, axis=1, mode="nearest")


def extract_features(img, bank: FilterBank = FilterBank()) -> np.ndarray:
    """Multi-scale Gaussian-derivative responses of the gray image, shape ``(C, H, W)``."""
    plane = gray_plane(img)
    ref = plane[0, 0]
    centered = plane - ref
    out = [plane.copy()] if bank.include_raw else []
    for sigma in bank.scales:
        g, d1, d2 = _derivative_kernels(sigma)
        for kind in bank.kernels:
            if kind == "gauss":
                out.append(_sep(centered, g, g) + ref)
            elif kind == "dx":
                out.append(_sep(centered, g, d1))
            elif kind == "dy":
                out.append(_sep(centered, d1, g))
            elif kind == "log":
                out.append(_sep(centered, d2, g) + _sep(centered, g, d2))
            else:
                raise ValueError(f"unknown filter kind {kind!r}")
    return np.stack(out, axis=0)


def save_features(f, path) -> None:
    f = np.asarray(f)
    if f.ndim != 3:
        raise ValueError(f"feature map must be (C, H, W), got shape {f.shape}")
    c, h, w = f.shape
    payload = np.ascontiguousarray(f, dtype="<f4").tobytes()
    Path(path).write_bytes(_HEADER.pack(FMAP_MAGIC, FMAP_VERSION, c, h, w) + payload)


def load_features(path) -> np.ndarray:
    """Read an FMAP file into a float32 ``(C, H, W)`` array."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != FMAP_MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {data[:4]!r}, expected {FMAP_MAGIC!r}", offset=0)
    if len(data) < _HEADER.size:
        raise FeatureTruncatedError(f"{path}: header truncated ({len(data)} bytes)", offset=len(data))
    _, version, c, h, w = _HEADER.unpack_from(data)
    if version != FMAP_VERSION:
        raise FeatureFormatError(f"{path}: unsupported version {version}", offset=4)
    n = c * h * w
    if n > MAX_ELEMENTS:
        raise FeatureFormatError(f"{path}: dimensions {c}x{h}x{w} overflow the element limit", offset=8)
    expected = _HEADER.size + 4 * n
    if len(data) != expected:
        raise FeatureTruncatedError(
            f"{path}: declared {c}x{h}x{w} needs {expected} bytes, file has {len(data)}",
            offset=min(len(data), expected),
        )
    arr = np.frombuffer(data, dtype="<f4", offset=_HEADER.size, count=n).reshape(c, h, w)
    return arr.astype(np.float32)


def gram(f, normalize: bool = True) -> np.ndarray:
    """Channel Gram matrix ``F F^T``, divided by ``C H W`` when ``normalize``.

    ``F`` is the ``C x (H W)`` flattening of the feature map.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 3:
        raise ValueError(f"feature map must be (C, H, W), got shape {f.shape}")
    c, h, w = f.shape
    flat = f.reshape(c, h * w)
    g = flat @ flat.T
    return g / (c * h * w) if normalize else g


def gram_distance(g1, g2) -> float:
    """Frobenius distance between two Gram matrices."""
    g1, g2 = np.asarray(g1, dtype=np.float64), np.asarray(g2, dtype=np.float64)
    if g1.shape != g2.shape:
        raise ValueError(f"Gram dimension mismatch: {g1.shape} vs {g2.shape}")
    return float(np.sqrt(np.sum((g1 - g2) ** 2)))


def channel_means(f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    return f.reshape(f.shape[0], -1).mean(axis=1)


def expectation_distance(f1, f2) -> float:
    """Euclidean distance between per-channel spatial means."""
    m1, m2 = channel_means(f1), channel_means(f2)
    if m1.shape != m2.shape:
        raise ValueError(f"channel mismatch: {m1.shape[0]} vs {m2.shape[0]}")
    return float(np.sqrt(np.sum((m1 - m2) ** 2)))


@dataclass(frozen=True)
class ContrastiveConfig:
    alpha: float = 0.3
    beta: float = 0.3
    negative_mode: str = "mean"

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("margins must be >= 0")
        if self.negative_mode not in ("mean", "min"):
            raise ValueError("negative_mode must be 'mean' or 'min'")


@dataclass
class ContrastiveResult:
    loss: float
    gram_term: float
    expectation_term: float
    d_gram_pos: float
    d_exp_pos: float
    negatives: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "gram_term": self.gram_term,
            "expectation_term": self.expectation_term,
            "d_gram_pos": self.d_gram_pos,
            "d_exp_pos": self.d_exp_pos,
            "negatives": self.negatives,
        }


def contrastive_loss(anchor, positive, negatives, cfg: ContrastiveConfig = ContrastiveConfig()) -> ContrastiveResult:
    """Hinge loss pulling ``anchor`` to ``positive`` and away from each negative.

    Per negative ``n``: ``max(dG(a,p) - dG(a,n) + alpha, 0)`` on Gram matrices
    plus ``max(dE(a,p) - dE(a,n) + beta, 0)`` on channel means.  ``mean``
    mode averages the terms over negatives; ``min`` uses the nearest negative
    for each term (equivalently the largest hinge).
    """
    negatives = list(negatives)
    if not negatives:
        raise ValueError("at least one negative is required")
    ga, gp = gram(anchor), gram(positive)
    dg_pos = gram_distance(ga, gp)
    de_pos = expectation_distance(anchor, positive)
    rows = []
    for neg in negatives:
        dg_neg = gram_distance(ga, gram(neg))
        de_neg = expectation_distance(anchor, neg)
        rows.append({
            "d_gram": dg_neg,
            "d_exp": de_neg,
            "gram_term": max(dg_pos - dg_neg + cfg.alpha, 0.0),
            "expectation_term": max(de_pos - de_neg + cfg.beta, 0.0),
        })
    if cfg.negative_mode == "mean":
        g_term = float(np.mean([r["gram_term"] for r in rows]))
        e_term = float(np.mean([r["expectation_term"] for r in rows]))
    else:
        g_term = max(dg_pos - min(r["d_gram"] for r in rows) + cfg.alpha, 0.0)
        e_term = max(de_pos - min(r["d_exp"] for r in rows) + cfg.beta, 0.0)
    return ContrastiveResult(g_term + e_term, g_term, e_term, dg_pos, de_pos, rows)
