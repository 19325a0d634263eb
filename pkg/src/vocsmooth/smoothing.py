"""Classical edge-preserving smoothing operators.

Five operators are provided: :func:`bilateral`, :func:`guided`,
:func:`rolling_guidance`, :func:`l0_smooth` and :func:`rtv`.  Each takes and
returns an ``(H, W, C)`` float64 image and clamps its output to ``[0, 1]``
unless called with ``clamp=False``.  The amount of pre-clamp overshoot is
logged at DEBUG level, or WARNING when it exceeds :data:`OVERSHOOT_WARN`.

Operators are also addressable by name through :data:`OPERATORS` and
:class:`OperatorSpec`, with named parameter sets in :data:`PRESETS`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError
from .imaging import as_image, box_filter, gaussian_filter, gray_plane

log = logging.getLogger(__name__)

OVERSHOOT_WARN = 0.1


def overshoot(img) -> float:
    """Largest distance of any sample outside ``[0, 1]`` (0 when in range)."""
    img = np.asarray(img)
    return float(max(0.0, -img.min(), img.max() - 1.0))


def _finish(out, name, clamp):
    amount = overshoot(out)
    if amount > OVERSHOOT_WARN:
        log.warning("%s: pre-clamp overshoot %.4g", name, amount)
    elif amount > 0:
        log.debug("%s: pre-clamp overshoot %.4g", name, amount)
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return out


def _require_positive(**values):
    for key, value in values.items():
        if not value > 0:
            raise ValueError(f"{key} must be > 0, got {value!r}")


# --- bilateral family -------------------------------------------------------


def joint_bilateral(img, guide, sigma_s: float, sigma_r: float, clamp: bool = True) -> np.ndarray:
    """Bilateral filter of ``img`` whose range kernel is evaluated on ``guide``.

    The window is the square of radius ``ceil(3 sigma_s)``; the range kernel
    uses the full Euclidean color distance over all guide channels.
    """
    _require_positive(sigma_s=sigma_s, sigma_r=sigma_r)
    img = as_image(img)
    guide = as_image(guide)
    if guide.shape[:2] != img.shape[:2]:
        raise ValueError(f"guide dimensions {guide.shape[:2]} differ from image {img.shape[:2]}")
    h, w, _ = img.shape
    r = math.ceil(3.0 * sigma_s)
    ref = img[0, 0, :].copy()
    src = np.pad(img - ref, ((r, r), (r, r), (0, 0)), mode="edge")
    gpad = np.pad(guide, ((r, r), (r, r), (0, 0)), mode="edge")
    inv_s = 1.0 / (2.0 * sigma_s * sigma_s)
    inv_r = 1.0 / (2.0 * sigma_r * sigma_r)

    num = np.zeros_like(img)
    den = np.zeros((h, w))
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            ws = math.exp(-(dy * dy + dx * dx) * inv_s)
            sl = (slice(r + dy, r + dy + h), slice(r + dx, r + dx + w))
            diff = gpad[sl] - guide
            weight = ws * np.exp(-np.sum(diff * diff, axis=2) * inv_r)
            num += weight[:, :, None] * src[sl]
            den += weight
    out = num / den[:, :, None] + ref
    return _finish(out, "joint_bilateral", clamp)


def bilateral(img, sigma_s: float = 3.0, sigma_r: float = 0.1, clamp: bool = True) -> np.ndarray:
    """Bilateral filter with Gaussian spatial and range kernels."""
    img = as_image(img)
    return joint_bilateral(img, img, sigma_s, sigma_r, clamp=clamp)


def rolling_guidance(img, sigma_s: float = 6.0, sigma_r: float = 0.3, iters: int = 4,
                     clamp: bool = True) -> np.ndarray:
    """Rolling guidance filter.

    The first of ``iters`` steps is a Gaussian blur (the guide starts
    constant); each later step is a joint bilateral filter of the input
    guided by the previous result.
    """
    _require_positive(sigma_s=sigma_s, sigma_r=sigma_r)
    if int(iters) < 1:
        raise ValueError("iters must be >= 1")
    img = as_image(img)
    J = gaussian_filter(img, sigma_s)
    for _ in range(int(iters) - 1):
        J = joint_bilateral(img, J, sigma_s, sigma_r, clamp=False)
    return _finish(J, "rolling_guidance", clamp)


# --- guided filter ----------------------------------------------------------


def guided(img, guide=None, radius: int = 4, eps: float = 0.01, clamp: bool = True) -> np.ndarray:
    """Guided filter with a single-channel guide (self-guided on gray when ``guide`` is None).

    Every window statistic is a :func:`~vocsmooth.imaging.box_filter` mean.
    """
    _require_positive(eps=eps)
    img = as_image(img)
    I = gray_plane(img if guide is None else guide)
    if I.shape != img.shape[:2]:
        raise ValueError(f"guide dimensions {I.shape} differ from image {img.shape[:2]}")
    mean_I = box_filter(I, radius)[:, :, 0]
    var_I = box_filter(I * I, radius)[:, :, 0] - mean_I * mean_I
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        p = img[:, :, c]
        mean_p = box_filter(p, radius)[:, :, 0]
        cov = box_filter(I * p, radius)[:, :, 0] - mean_I * mean_p
        a = cov / (var_I + eps)
        b = mean_p - a * mean_I
        out[:, :, c] = box_filter(a, radius)[:, :, 0] * I + box_filter(b, radius)[:, :, 0]
    return _finish(out, "guided", clamp)


# --- L0 gradient minimization -----------------------------------------------


def l0_smooth(img, lam: float = 0.01, kappa: float = 2.0, beta_max: float = 1e5,
              clamp: bool = True) -> np.ndarray:
    """L0 gradient minimization by half-quadratic splitting.

    The image is mirror-extended to twice its size so the FFT's periodic
    boundary behaves like a reflecting one; the result is cropped back.
    """
    if not lam >= 0:
        raise ValueError(f"lambda must be >= 0, got {lam!r}")
    if not kappa > 1:
        raise ValueError(f"kappa must be > 1, got {kappa!r}")
    img = as_image(img)
    if lam == 0:
        return _finish(img.copy(), "l0_smooth", clamp)
    h, w, _ = img.shape
    S = np.pad(img, ((0, h), (0, w), (0, 0)), mode="symmetric")
    H, W = S.shape[:2]
    fx = np.exp(2j * np.pi * np.arange(W) / W) - 1.0
    fy = np.exp(2j * np.pi * np.arange(H) / H) - 1.0
    Fx = np.broadcast_to(fx[None, :, None], S.shape)
    Fy = np.broadcast_to(fy[:, None, None], S.shape)
    denom_grad = np.abs(Fx) ** 2 + np.abs(Fy) ** 2
    FI = np.fft.fft2(S, axes=(0, 1))

    beta = 2.0 * lam
    while beta <= beta_max:
        gh = np.roll(S, -1, axis=1) - S
        gv = np.roll(S, -1, axis=0) - S
        flat = np.sum(gh * gh + gv * gv, axis=2) < lam / beta
        gh[flat] = 0.0
        gv[flat] = 0.0
        num = FI + beta * (np.conj(Fx) * np.fft.fft2(gh, axes=(0, 1))
                           + np.conj(Fy) * np.fft.fft2(gv, axes=(0, 1)))
        S = np.real(np.fft.ifft2(num / (1.0 + beta * denom_grad), axes=(0, 1)))
        beta *= kappa
    return _finish(S[:h, :w].copy(), "l0_smooth", clamp)


# --- relative total variation -----------------------------------------------


def _forward_diff(plane, axis):
    d = np.diff(plane, axis=axis)
    pad = [(0, 0), (0, 0)]
    pad[axis] = (0, 1)
    return np.pad(d, pad)


def rtv_weights(S, sigma: float, eps_s: float, eps: float = 1e-3):
    """Per-pixel smoothness weights ``(wx, wy)`` of relative total variation.

    ``w = G_sigma * (1 / (|G_sigma * dS| + eps)) / (|dS| + eps_s)`` along each
    axis, with channel magnitudes averaged.  The weight of the link leaving
    the last column (row) is zero.
    """
    S = as_image(S)
    weights = []
    for axis in (1, 0):
        d = np.stack([_forward_diff(S[:, :, c], axis) for c in range(S.shape[2])], axis=2)
        windowed = np.mean(np.abs(gaussian_filter(d, sigma)), axis=2)
        inherent = gaussian_filter(1.0 / (windowed + eps), sigma)[:, :, 0]
        total = np.mean(np.abs(d), axis=2)
        wgt = inherent / (total + eps_s)
        if axis == 1:
            wgt[:, -1] = 0.0
        else:
            wgt[-1, :] = 0.0
        weights.append(wgt)
    return weights[0], weights[1]


def weighted_laplacian_system(wx, wy, lam: float) -> sp.csr_matrix:
    """Sparse 5-point matrix ``Id + lam * L_w`` over row-major pixels.

    ``wx[i, j]`` weights the link between ``(i, j)`` and ``(i, j+1)``,
    ``wy[i, j]`` the link between ``(i, j)`` and ``(i+1, j)``.
    """
    h, w = wx.shape
    n = h * w
    idx = np.arange(n).reshape(h, w)
    ex = lam * wx[:, :-1].ravel()
    ey = lam * wy[:-1, :].ravel()
    rows = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    cols = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    vals = np.concatenate([ex, ey])
    off = sp.coo_matrix((-vals, (rows, cols)), shape=(n, n))
    diag = np.ones(n)
    np.add.at(diag, rows, vals)
    np.add.at(diag, cols, vals)
    return (off + off.T + sp.diags(diag)).tocsr()


def conjugate_gradient(A, b, x0=None, tol: float = 1e-6, max_iter: int | None = None):
    """Jacobi-preconditioned conjugate gradient for an SPD ``A``.

    Stops once ``||b - A x|| <= tol * ||b||``.  Returns ``(x, iterations,
    relative_residual)``; raises :class:`NumericalError` after ``max_iter``
    iterations (default ``10 * n``).
    """
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), 0, 0.0
    inv_diag = 1.0 / A.diagonal()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - A @ x
    rel = np.linalg.norm(r) / bnorm
    if rel <= tol:
        return x, 0, rel
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rel = np.linalg.norm(r) / bnorm
        if rel <= tol:
            return x, it, rel
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NumericalError(
        f"conjugate gradient did not reach relative residual {tol:g} in {max_iter} iterations "
        f"(last residual {rel:.3g})",
        residual=rel,
        iterations=max_iter,
    )


def rtv(img, lam: float = 0.01, sigma: float = 3.0, eps_s: float = 0.02, iters: int = 3,
        tol: float = 1e-6, clamp: bool = True) -> np.ndarray:
    """Relative total variation structure extraction.

    Each of ``iters`` reweighting passes recomputes :func:`rtv_weights` from
    the current estimate and solves ``(Id + lam * L_w) S = I`` per channel by
    :func:`conjugate_gradient`.
    """
    _require_positive(lam=lam, sigma=sigma, eps_s=eps_s)
    if int(iters) < 1:
        raise ValueError("iters must be >= 1")
    img = as_image(img)
    h, w, ch = img.shape
    S = img.copy()
    for _ in range(int(iters)):
        wx, wy = rtv_weights(S, sigma, eps_s)
        A = weighted_laplacian_system(wx, wy, lam)
        for c in range(ch):
            ref = img[0, 0, c]
            x, _, _ = conjugate_gradient(
                A, (img[:, :, c] - ref).ravel(), x0=(S[:, :, c] - ref).ravel(), tol=tol,
                max_iter=10 * h * w,
            )
            S[:, :, c] = x.reshape(h, w) + ref
    return _finish(S, "rtv", clamp)


# --- registry ---------------------------------------------------------------

# name -> (function, {param: type}) ; parameter names as used on the command line.
OPERATORS = {
    "bilateral": (bilateral, {"sigma_s": float, "sigma_r": float}),
    "guided": (guided, {"radius": int, "eps": float}),
    "rolling_guidance": (rolling_guidance, {"sigma_s": float, "sigma_r": float, "iters": int}),
    "l0": (l0_smooth, {"lambda": float, "kappa": float}),
    "rtv": (rtv, {"lambda": float, "sigma": float, "eps_s": float, "iters": int}),
}

_KEYWORD = {"lambda": "lam"}


@dataclass(frozen=True)
class OperatorSpec:
    """A smoothing operator name plus its parameters."""

    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in OPERATORS:
            raise KeyError(f"unknown operator {self.name!r}; valid names: {', '.join(sorted(OPERATORS))}")
        schema = OPERATORS[self.name][1]
        clean = {}
        for key, value in self.params.items():
            if key not in schema:
                raise KeyError(
                    f"operator {self.name!r} has no parameter {key!r}; valid: {', '.join(schema)}"
                )
            clean[key] = schema[key](value)
        object.__setattr__(self, "params", clean)

    def apply(self, img, clamp: bool = True) -> np.ndarray:
        fn = OPERATORS[self.name][0]
        kwargs = {_KEYWORD.get(k, k): v for k, v in self.params.items()}
        return fn(img, clamp=clamp, **kwargs)

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        args = ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"{self.name}({args})"

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(sorted(self.params.items()))}

    @classmethod
    def from_dict(cls, data) -> "OperatorSpec":
        return cls(data["name"], dict(data.get("params", {})))


# Figure-caption parameter sets, plus the candidate bank used for screening.
PRESETS = {
    "fig1-gf": OperatorSpec("guided", {"radius": 3, "eps": 0.02}),
    "fig1-rgf": OperatorSpec("rolling_guidance", {"sigma_s": 6.0, "sigma_r": 0.3, "iters": 4}),
    "fig1-l0": OperatorSpec("l0", {"lambda": 0.01, "kappa": 2.0}),
    "fig1-rtv": OperatorSpec("rtv", {"lambda": 0.01, "sigma": 3.0, "eps_s": 0.02, "iters": 3}),
    "fig2-l0": OperatorSpec("l0", {"lambda": 0.1, "kappa": 2.0}),
    "fig2-rtv": OperatorSpec("rtv", {"lambda": 0.01, "sigma": 3.0, "eps_s": 0.01, "iters": 2}),
    "fig3-l0": OperatorSpec("l0", {"lambda": 0.08, "kappa": 2.0}),
    "bf-default": OperatorSpec("bilateral", {"sigma_s": 3.0, "sigma_r": 0.1}),
}

CANDIDATE_PRESETS = ("bf-default", "fig1-gf", "fig1-rgf", "fig1-l0", "fig1-rtv")


def resolve(name: str | None = None, preset: str | None = None, params: dict | None = None) -> OperatorSpec:
    """Build an :class:`OperatorSpec` from a preset and/or a name, with overriding params."""
    params = dict(params or {})
    if preset is not None:
        if preset not in PRESETS:
            raise KeyError(f"unknown preset {preset!r}; valid presets: {', '.join(sorted(PRESETS))}")
        base = PRESETS[preset]
        if name is not None and name != base.name:
            raise ValueError(f"preset {preset!r} is for operator {base.name!r}, not {name!r}")
        return OperatorSpec(base.name, {**base.params, **params})
    if name is None:
        raise ValueError("an operator name or preset is required")
    return OperatorSpec(name, params)
