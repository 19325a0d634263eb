"""Image representation, file IO and the shared low-level numerics.

Images are plain ``numpy`` arrays of shape ``(H, W, C)`` with ``C`` in
``{1, 3}`` (channel-interleaved, row-major), holding float64 intensities in
``[0, 1]``.  Scalar fields (gradients, Laplacians) and edge maps are 2-D
``(H, W)`` arrays, float64 and bool respectively.

All borders use replicate padding.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .errors import ImageDecodeError

GRAY_WEIGHTS = (0.299, 0.587, 0.114)

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()

_MODES = {"L": 1, "RGB": 3}
_SUFFIX_FORMAT = {".png": "PNG", ".ppm": "PPM", ".pgm": "PPM", ".pnm": "PPM"}


def as_image(arr) -> np.ndarray:
    """Return ``arr`` as a float64 ``(H, W, C)`` image, promoting 2-D input to one channel."""
    img = np.asarray(arr, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"expected an (H, W) or (H, W, C) array with C in {{1, 3}}, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image must have at least one row and one column")
    return img


def as_plane(arr) -> np.ndarray:
    """Return a single-channel image (or 2-D field) as a float64 ``(H, W)`` array."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 3:
        if a.shape[2] != 1:
            raise ValueError(f"expected a single-channel image, got {a.shape[2]} channels")
        a = a[:, :, 0]
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D field, got shape {a.shape}")
    return a


def load_image(path) -> np.ndarray:
    """Read an 8-bit PNG or binary PPM/PGM file.

    Sample values ``v`` map to ``v / 255``.  16-bit data, palettes, alpha and
    any other format raise :class:`ImageDecodeError`.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        pil = PILImage.open(path)
        pil.load()
    except (OSError, SyntaxError, ValueError) as exc:
        raise ImageDecodeError(f"{path}: cannot decode image: {exc}") from exc
    if pil.format not in ("PNG", "PPM"):
        raise ImageDecodeError(f"{path}: unsupported file format {pil.format!r} (PNG, PPM or PGM only)")
    if pil.mode not in _MODES:
        raise ImageDecodeError(
            f"{path}: unsupported bit depth or color model {pil.mode!r} in {pil.format} file "
            "(8-bit gray or RGB only)"
        )
    data = np.asarray(pil, dtype=np.uint8)
    return as_image(data.astype(np.float64) / 255.0)


def quantize(img) -> np.ndarray:
    """Map ``[0, 1]`` intensities to uint8 with round-half-up."""
    img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.floor(img * 255.0 + 0.5).astype(np.uint8)


def save_image(img, path) -> None:
    """Write ``img`` as 8-bit PNG (``.png``) or PPM/PGM (``.ppm``, ``.pgm``, ``.pnm``)."""
    img = as_image(img)
    path = Path(path)
    fmt = _SUFFIX_FORMAT.get(path.suffix.lower())
    if fmt is None:
        raise ValueError(f"{path}: unsupported output extension {path.suffix!r}")
    q = quantize(img)
    if img.shape[2] == 1:
        pil = PILImage.fromarray(q[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(q, mode="RGB")
    pil.save(path, format=fmt)


def to_grayscale(img) -> np.ndarray:
    """Luma conversion ``0.299 R + 0.587 G + 0.114 B`` of a 3-channel image."""
    img = as_image(img)
    if img.shape[2] != 3:
        raise ValueError("to_grayscale needs a 3-channel image")
    r, g, b = GRAY_WEIGHTS
    gray = r * img[:, :, 0] + g * img[:, :, 1] + b * img[:, :, 2]
    return gray[:, :, None]


def gray_plane(img) -> np.ndarray:
    """Grayscale ``(H, W)`` plane of any image; 3-channel input goes through :func:`to_grayscale`."""
    img = as_image(img)
    if img.shape[2] == 3:
        img = to_grayscale(img)
    return img[:, :, 0]


def mean_intensity(img) -> float:
    """Mean of a single-channel image."""
    plane = as_plane(img)
    return float(np.sum(plane, dtype=np.float64) / plane.size)


def _correlate_plane(plane, kernel):
    # Zero-sum kernels: removing the first pixel keeps constant regions exactly zero.
    return ndimage.correlate(plane - plane[0, 0], kernel, mode="nearest")


def sobel_gradients(img):
    """Unnormalized 3x3 Sobel responses ``(gx, gy)`` of a single-channel image."""
    plane = as_plane(img)
    return _correlate_plane(plane, SOBEL_X), _correlate_plane(plane, SOBEL_Y)


def sobel_edges(img, threshold: float = 0.1) -> np.ndarray:
    """Edge mask where the Sobel gradient magnitude exceeds ``threshold``.

    The kernels are unnormalized (center weight 2), so a unit step has
    magnitude 4 on both adjacent columns.
    """
    if not threshold >= 0:
        raise ValueError("threshold must be >= 0")
    gx, gy = sobel_gradients(img)
    return np.hypot(gx, gy) > threshold


LAPLACIAN_STENCIL = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


def laplacian(img) -> np.ndarray:
    """5-point discrete Laplacian with replicate padding."""
    return _correlate_plane(as_plane(img), LAPLACIAN_STENCIL)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled 1-D Gaussian of radius ``ceil(3 sigma)``, normalized to unit sum."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _per_channel(img, fn):
    # Filtering the offset from the first pixel keeps constant images bit-exact.
    img = as_image(img)
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        plane = img[:, :, c]
        ref = plane[0, 0]
        out[:, :, c] = fn(plane - ref) + ref
    return out


def separable_filter(img, kernel) -> np.ndarray:
    """Apply the same symmetric 1-D kernel along rows then columns."""
    kernel = np.asarray(kernel, dtype=np.float64)

    def run(plane):
        tmp = ndimage.correlate1d(plane, kernel, axis=0, mode="nearest")
        return ndimage.correlate1d(tmp, kernel, axis=1, mode="nearest")

    return _per_channel(img, run)


def gaussian_filter(img, sigma: float) -> np.ndarray:
    """Separable Gaussian blur (radius ``ceil(3 sigma)``, replicate padding)."""
    return separable_filter(img, gaussian_kernel(sigma))


def _box_1d(plane, radius, axis):
    n = 2 * radius + 1
    pad = [(0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(plane, pad, mode="edge")
    csum = np.cumsum(padded, axis=axis, dtype=np.float64)
    zero_shape = list(csum.shape)
    zero_shape[axis] = 1
    csum = np.concatenate([np.zeros(zero_shape), csum], axis=axis)
    length = plane.shape[axis]
    hi = np.take(csum, np.arange(n, n + length), axis=axis)
    lo = np.take(csum, np.arange(0, length), axis=axis)
    return (hi - lo) / n


def box_filter(img, radius: int) -> np.ndarray:
    """Mean over the ``(2r+1)^2`` window via running sums (cost independent of ``r``)."""
    radius = int(radius)
    if radius < 1:
        raise ValueError("radius must be >= 1")
    return _per_channel(img, lambda p: _box_1d(_box_1d(p, radius, 0), radius, 1))


def max_pool(img, n: int) -> np.ndarray:
    """Non-overlapping ``n x n`` max pooling; trailing partial windows are kept."""
    n = int(n)
    if n < 1:
        raise ValueError("pool size must be >= 1")
    img = as_image(img)
    if n == 1:
        return img.copy()
    h, w, c = img.shape
    oh, ow = -(-h // n), -(-w // n)
    padded = np.pad(img, ((0, oh * n - h), (0, ow * n - w), (0, 0)), mode="edge")
    return padded.reshape(oh, n, ow, n, c).max(axis=(1, 3))
