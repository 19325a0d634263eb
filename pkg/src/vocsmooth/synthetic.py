"""Seeded synthetic ground truths and textures for desk-scale experiments.

Ground truths are piecewise-smooth color images (flat or gently shaded
regions separated by sharp boundaries); textures are gray patterns of
bounded amplitude whose zero-mean layer gets blended on top.
"""

from __future__ import annotations

import numpy as np

from .dataset import blend_texture, make_rng

TEXTURE_KINDS = ("grating", "checker", "dots", "grain", "bricks")


def piecewise_smooth(seed: int, size: int = 64, regions: int = 5) -> np.ndarray:
    """Voronoi-partitioned color image with a soft linear shading inside each cell."""
    rng = make_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    centers = rng.uniform(0, size, size=(regions, 2))
    d2 = (yy[None] - centers[:, 0, None, None]) ** 2 + (xx[None] - centers[:, 1, None, None]) ** 2
    label = np.argmin(d2, axis=0)
    colors = rng.uniform(0.25, 0.75, size=(regions, 3))
    slopes = rng.uniform(-0.1, 0.1, size=(regions, 2)) / size
    img = np.empty((size, size, 3))
    for k in range(regions):
        m = label == k
        shade = slopes[k, 0] * (yy - centers[k, 0]) + slopes[k, 1] * (xx - centers[k, 1])
        for c in range(3):
            img[:, :, c][m] = colors[k, c] + shade[m]
    return np.clip(img, 0.0, 1.0)


def texture(kind: str, seed: int, size: int = 64, amplitude: float = 0.12) -> np.ndarray:
    """Gray texture image centered on 0.5 with peak deviation about ``amplitude``."""
    rng = make_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    if kind == "grating":
        theta = rng.uniform(0, np.pi)
        period = rng.uniform(3.0, 5.0)
        u = np.cos(theta) * xx + np.sin(theta) * yy
        pattern = np.sin(2 * np.pi * u / period)
    elif kind == "checker":
        cell = int(rng.integers(2, 4))
        pattern = np.where(((yy // cell) + (xx // cell)) % 2 == 0, 1.0, -1.0)
    elif kind == "dots":
        period = int(rng.integers(4, 7))
        oy, ox = rng.integers(0, period, 2)
        r2 = ((yy + oy) % period - period / 2) ** 2 + ((xx + ox) % period - period / 2) ** 2
        pattern = np.where(r2 < (period / 3.5) ** 2, 1.0, -0.4)
    elif kind == "grain":
        pattern = rng.uniform(-1.0, 1.0, size=(size, size))
    elif kind == "bricks":
        h = int(rng.integers(4, 6))
        w = 2 * h
        row = yy // h
        shifted = xx + (row % 2) * (w // 2)
        mortar = (yy % h == 0) | (shifted % w == 0)
        pattern = np.where(mortar, -1.0, 0.5) + 0.3 * rng.uniform(-1, 1, size=(size, size))
    else:
        raise ValueError(f"unknown texture kind {kind!r}; valid: {', '.join(TEXTURE_KINDS)}")
    pattern = pattern / max(np.abs(pattern).max(), 1e-12)
    return np.clip(0.5 + amplitude * pattern, 0.0, 1.0)[:, :, None]


def mini_voc_smooth(n_gt: int = 10, n_textures: int = 5, size: int = 64, seed: int = 0):
    """Desk-scale synthetic set: every ground truth blended with every texture.

    Returns ``(pairs, gts, textures)`` where ``pairs`` is a list of
    ``(input, gt)``.
    """
    rng = make_rng(seed)
    gt_seeds = rng.integers(0, 2 ** 31, size=n_gt)
    tex_seeds = rng.integers(0, 2 ** 31, size=n_textures)
    gts = [piecewise_smooth(int(s), size) for s in gt_seeds]
    textures = [texture(TEXTURE_KINDS[i % len(TEXTURE_KINDS)], int(s), size) for i, s in enumerate(tex_seeds)]
    pairs = [(blend_texture(gt, tex).image, gt) for gt in gts for tex in textures]
    return pairs, gts, textures
