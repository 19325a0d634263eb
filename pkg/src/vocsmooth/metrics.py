"""Image quality and screening metrics.

Color inputs to :func:`ssim` and the smoothness measures are reduced to
luma with :func:`~vocsmooth.imaging.to_grayscale` first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imaging import as_image, gray_plane, laplacian, max_pool

SMOOTH_THRESHOLD = 0.05


@dataclass(frozen=True)
class SsimParams:
    """Stabilizing constants and exponents of the luminance/contrast/structure product."""

    c1: float = 0.01 ** 2
    c2: float = 0.03 ** 2
    c3: float = 0.03 ** 2 / 2
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    window: int = 11
    sigma: float = 1.5

    def __post_init__(self):
        if min(self.c1, self.c2, self.c3) <= 0:
            raise ValueError("SSIM constants must be > 0")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("SSIM exponents must be >= 0")


@dataclass(frozen=True)
class WindowSpec:
    size: int = 16
    stride: int = 8

    def check(self, shape):
        h, w = shape[:2]
        if not 1 <= self.stride <= self.size <= min(h, w):
            raise ValueError(
                f"window spec needs 1 <= stride ({self.stride}) <= size ({self.size}) <= {min(h, w)}"
            )


def _check_same(a, b):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def psnr(a, b) -> float:
    """PSNR in dB for ``[0, 1]`` intensities; ``inf`` for identical images."""
    a, b = as_image(a), as_image(b)
    _check_same(a, b)
    mse = float(np.mean((a - b) ** 2, dtype=np.float64))
    if mse == 0:
        return math.inf
    return -10.0 * math.log10(mse)


def _window_kernel(size, sigma):
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _local_mean(plane, kernel):
    tmp = ndimage.correlate1d(plane, kernel, axis=0, mode="nearest")
    return ndimage.correlate1d(tmp, kernel, axis=1, mode="nearest")


def _signed_pow(x, e):
    if e == 1:
        return x
    return np.sign(x) * np.abs(x) ** e


def ssim_components(a, b, p: SsimParams = SsimParams()):
    """Per-pixel luminance, contrast and structure maps ``(l, c, s)``."""
    x, y = gray_plane(a), gray_plane(b)
    _check_same(x, y)
    k = _window_kernel(p.window, p.sigma)
    # Statistics of the offset from a shared reference keep flat regions exact.
    ref = 0.5 * (x[0, 0] + y[0, 0])
    xs, ys = x - ref, y - ref
    mx, my = _local_mean(xs, k), _local_mean(ys, k)
    vx = np.maximum(_local_mean(xs * xs, k) - mx * mx, 0.0)
    vy = np.maximum(_local_mean(ys * ys, k) - my * my, 0.0)
    cxy = _local_mean(xs * ys, k) - mx * my
    mx, my = mx + ref, my + ref
    sx, sy = np.sqrt(vx), np.sqrt(vy)
    lum = (2 * mx * my + p.c1) / (mx * mx + my * my + p.c1)
    con = (2 * sx * sy + p.c2) / (vx + vy + p.c2)
    struct = (cxy + p.c3) / (sx * sy + p.c3)
    return lum, con, struct


def ssim(a, b, p: SsimParams = SsimParams()) -> float:
    """Mean over Gaussian-weighted local windows of ``l^alpha * c^beta * s^gamma``."""
    lum, con, struct = ssim_components(a, b, p)
    sim = _signed_pow(lum, p.alpha) * _signed_pow(con, p.beta) * _signed_pow(struct, p.gamma)
    return float(np.mean(sim, dtype=np.float64))


def multiscale_pooled_ssim(a, b, levels: int = 4, p: SsimParams = SsimParams()) -> float:
    """Sum of :func:`ssim` over max-pooled copies at scales ``1, 2, ..., 2**(levels-1)``."""
    return float(sum(multiscale_terms(a, b, levels, p)))


def multiscale_terms(a, b, levels: int = 4, p: SsimParams = SsimParams()):
    a, b = as_image(a), as_image(b)
    _check_same(a, b)
    levels = int(levels)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    coarsest = 2 ** (levels - 1)
    if coarsest > min(a.shape[:2]):
        raise ValueError(f"image {a.shape[:2]} is smaller than the coarsest pool {coarsest}")
    return [ssim(max_pool(a, 2 ** i), max_pool(b, 2 ** i), p) for i in range(levels)]


@dataclass(frozen=True)
class SmoothValue:
    std: float
    laplacian: float

    @property
    def value(self) -> float:
        return self.std + self.laplacian


def smooth_value_parts(patch) -> SmoothValue:
    """Standard deviation and interior mean ``|laplacian|`` of a gray patch."""
    plane = gray_plane(patch)
    if plane.shape[0] < 3 or plane.shape[1] < 3:
        raise ValueError(f"patch must be at least 3x3, got {plane.shape}")
    lap = laplacian(plane)[1:-1, 1:-1]
    # std is shift-invariant; the offset makes constant patches exactly 0
    return SmoothValue(float(np.std(plane - plane[0, 0])), float(np.mean(np.abs(lap))))


def smooth_value(patch) -> float:
    """Patch smoothness score: ``std(patch) + mean |laplacian|`` over the interior."""
    return smooth_value_parts(patch).value


def window_origins(shape, w: WindowSpec):
    h, wd = shape[:2]
    return [(y, x) for y in range(0, h - w.size + 1, w.stride) for x in range(0, wd - w.size + 1, w.stride)]


def find_textureless_windows(img, edges, w: WindowSpec = WindowSpec()):
    """Row-major ``(y, x)`` origins of stride-grid windows that hold no edge pixel."""
    edges = np.asarray(edges, dtype=bool)
    img = as_image(img)
    if edges.shape != img.shape[:2]:
        raise ValueError(f"edge map {edges.shape} does not match image {img.shape[:2]}")
    w.check(edges.shape)
    # Summed-area table: count edge pixels per window in O(1).
    sat = np.zeros((edges.shape[0] + 1, edges.shape[1] + 1), dtype=np.int64)
    sat[1:, 1:] = np.cumsum(np.cumsum(edges, axis=0), axis=1)
    s = w.size
    found = []
    for y, x in window_origins(edges.shape, w):
        n = sat[y + s, x + s] - sat[y, x + s] - sat[y + s, x] + sat[y, x]
        if n == 0:
            found.append((y, x))
    return found


NO_EVALUABLE_REGION = "no-evaluable-region"
ABOVE_THRESHOLD = "above-threshold"


@dataclass(frozen=True)
class SmoothTestResult:
    passed: bool
    score: float
    std_part: float
    laplacian_part: float
    windows: int
    reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "score": self.score,
            "std_part": self.std_part,
            "laplacian_part": self.laplacian_part,
            "windows": self.windows,
            "reason": self.reason,
        }


def smooth_test(candidate, edges, w: WindowSpec = WindowSpec(), threshold: float = SMOOTH_THRESHOLD) -> SmoothTestResult:
    """Mean smoothness score over edge-free windows; passes when below ``threshold``."""
    if not threshold > 0:
        raise ValueError("threshold must be > 0")
    plane = gray_plane(candidate)
    origins = find_textureless_windows(plane, edges, w)
    if not origins:
        return SmoothTestResult(False, math.nan, math.nan, math.nan, 0, NO_EVALUABLE_REGION)
    s = w.size
    parts = [smooth_value_parts(plane[y:y + s, x:x + s]) for y, x in origins]
    std_part = float(np.mean([q.std for q in parts]))
    lap_part = float(np.mean([q.laplacian for q in parts]))
    score = float(np.mean([q.value for q in parts]))
    passed = score < threshold
    return SmoothTestResult(passed, score, std_part, lap_part, len(origins), None if passed else ABOVE_THRESHOLD)
