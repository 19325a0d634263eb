"""Supervision terms of the smoothing network, as standalone audit evaluators.

These compute values only; there are no gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imaging import as_image, as_plane
from .metrics import SsimParams, multiscale_terms

PROB_EPS = 1e-7
IGNORE_LABEL = 255

PARTS = ("edge", "re_s0", "re_s1", "dtv_s0", "dtv_s1", "contrastive", "seg")


def _check_same(a, b, what="inputs"):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch between {what}: {a.shape} vs {b.shape}")


def edge_loss(pred, gt) -> float:
    """Class-balanced binary cross entropy summed over pixels.

    The edge pixels are weighted by the non-edge fraction ``|E-|/|E|`` and the
    non-edge pixels by its complement.
    """
    p = np.clip(as_plane(pred), PROB_EPS, 1.0 - PROB_EPS)
    e = np.asarray(gt, dtype=bool)
    if e.ndim == 3:
        e = e[:, :, 0]
    _check_same(p, e, "prediction and edge map")
    alpha = float(np.count_nonzero(~e)) / e.size
    pos = -np.sum(np.log(p[e]))
    neg = -np.sum(np.log(1.0 - p[~e]))
    return float(alpha * pos + (1.0 - alpha) * neg)


def reconstruction_terms(s, s_gt, levels: int = 4, p: SsimParams = SsimParams()) -> dict:
    s, s_gt = as_image(s), as_image(s_gt)
    _check_same(s, s_gt)
    l1 = float(np.mean(np.abs(s - s_gt)))
    sims = multiscale_terms(s, s_gt, levels, p)
    return {"l1": l1, "ssim_terms": [1.0 - v for v in sims]}


def reconstruction_loss(s, s_gt, levels: int = 4, p: SsimParams = SsimParams()) -> float:
    """Mean absolute error plus ``sum_i (1 - ssim)`` over max-pool scales ``2**i``.

    Uses ``1 - ssim`` per scale so the loss vanishes at equality.
    """
    terms = reconstruction_terms(s, s_gt, levels, p)
    return terms["l1"] + float(sum(terms["ssim_terms"]))


def dtv_terms(s, s_gt, edges) -> dict:
    s, s_gt = as_image(s), as_image(s_gt)
    _check_same(s, s_gt)
    e = np.asarray(edges, dtype=bool)
    if e.shape != s.shape[:2]:
        raise ValueError(f"edge map {e.shape} does not match image {s.shape[:2]}")
    l1 = float(np.mean(np.abs(s - s_gt)[e])) if e.any() else 0.0
    dx = np.zeros_like(s)
    dy = np.zeros_like(s)
    dx[:, :-1] = s[:, 1:] - s[:, :-1]
    dy[:-1, :] = s[1:, :] - s[:-1, :]
    tv_map = np.mean(np.abs(dx) + np.abs(dy), axis=2)
    tv = float(np.mean(tv_map[~e])) if (~e).any() else 0.0
    return {"l1_edge": l1, "tv_nonedge": tv}


def dtv_loss(s, s_gt, edges) -> float:
    """Edge-restricted L1 fidelity plus forward-difference TV of ``s`` on non-edge pixels.

    Channel values are averaged per pixel; an empty pixel set contributes 0.
    """
    t = dtv_terms(s, s_gt, edges)
    return t["l1_edge"] + t["tv_nonedge"]


def seg_cross_entropy(probs, labels, ignore_label: int = IGNORE_LABEL) -> float:
    """Mean ``-log p(label)`` over non-ignored pixels."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 3 or probs.shape[2] < 2:
        raise ValueError(f"class probabilities must be (H, W, K) with K >= 2, got {probs.shape}")
    if labels.shape != probs.shape[:2]:
        raise ValueError(f"label map {labels.shape} does not match probabilities {probs.shape[:2]}")
    k = probs.shape[2]
    valid = labels != ignore_label
    if not valid.any():
        raise ValueError("every pixel carries the ignore label")
    lab = labels[valid].astype(np.int64)
    if lab.min() < 0 or lab.max() >= k:
        raise ValueError(f"labels must lie in [0, {k}) or equal {ignore_label}")
    picked = np.clip(probs[valid, lab], PROB_EPS, 1.0 - PROB_EPS)
    return float(np.mean(-np.log(picked)))


@dataclass(frozen=True)
class LossWeights:
    lambda_e: float = 0.001
    lambda_c: float = 1.0
    lambda_seg: float = 1.0

    def __post_init__(self):
        if min(self.lambda_e, self.lambda_c, self.lambda_seg) < 0:
            raise ValueError("loss weights must be >= 0")

    def coefficient(self, part: str) -> float:
        return {"edge": self.lambda_e, "contrastive": self.lambda_c, "seg": self.lambda_seg}.get(part, 1.0)


def total_loss(parts: dict, w: LossWeights = LossWeights()):
    """Weighted sum of the seven terms; returns ``(total, weighted breakdown)``.

    Missing parts count as zero.
    """
    unknown = set(parts) - set(PARTS)
    if unknown:
        raise KeyError(f"unknown loss parts: {', '.join(sorted(unknown))}")
    breakdown = {}
    for name in PARTS:
        value = float(parts.get(name, 0.0))
        if not math.isfinite(value) or value < 0:
            raise ValueError(f"loss part {name!r} must be finite and >= 0, got {value!r}")
        breakdown[name] = w.coefficient(name) * value
    total = 0.0
    for name in PARTS:
        total += breakdown[name]
    return total, breakdown
