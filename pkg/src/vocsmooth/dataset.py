"""Texture blending, ground-truth screening, augmentation and dataset manifests."""

from __future__ import annotations

import json
import math
from fractions import Fraction
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .imaging import as_image, gray_plane, mean_intensity, save_image, sobel_edges, to_grayscale
from .metrics import SMOOTH_THRESHOLD, SmoothTestResult, WindowSpec, smooth_test, ssim
from .smoothing import OperatorSpec

SCHEMA = 1
DEFAULT_EDGE_THRESHOLD = 0.1
DEFAULT_SPLITS = (("train", 0.8), ("val", 0.17), ("test", 0.03))
STRUCTURE_CHECK = "full-image SSIM against the original (automatic stand-in for volunteer voting)"


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator used for every randomized step."""
    return np.random.Generator(np.random.Philox(int(seed)))


# --- blending ---------------------------------------------------------------


def tile_texture(texture, shape) -> np.ndarray:
    """Mirror-tile (and crop) ``texture`` to ``shape[:2]``."""
    texture = as_image(texture)
    h, w = shape[:2]
    th, tw = texture.shape[:2]
    reps_y, reps_x = -(-h // th), -(-w // tw)
    rows = []
    for i in range(reps_y):
        tile_row = texture if i % 2 == 0 else texture[::-1]
        row = [tile_row if j % 2 == 0 else tile_row[:, ::-1] for j in range(reps_x)]
        rows.append(np.concatenate(row, axis=1))
    return np.concatenate(rows, axis=0)[:h, :w]


def texture_layer(texture) -> np.ndarray:
    """Zero-mean gray residual ``gray(texture) - mean(gray(texture))`` as an ``(H, W)`` plane."""
    texture = as_image(texture)
    gray = to_grayscale(texture) if texture.shape[2] == 3 else texture
    return gray[:, :, 0] - mean_intensity(gray)


class BlendResult(NamedTuple):
    image: np.ndarray
    layer: np.ndarray
    clamp_fraction: float


def blend_texture(gt, texture) -> BlendResult:
    """Add the texture layer of ``texture`` to every channel of ``gt`` and clamp to ``[0, 1]``.

    ``texture`` must already be tiled to the size of ``gt`` (see :func:`tile_texture`).
    """
    gt = as_image(gt)
    texture = as_image(texture)
    if texture.shape[:2] != gt.shape[:2]:
        raise ValueError(f"texture {texture.shape[:2]} does not match ground truth {gt.shape[:2]}")
    layer = texture_layer(texture)
    raw = gt + layer[:, :, None]
    out = np.clip(raw, 0.0, 1.0)
    clamp_fraction = float(np.mean(out != raw))
    return BlendResult(out, layer, clamp_fraction)


@dataclass
class BlendPair:
    input: np.ndarray
    ground_truth: np.ndarray
    texture_id: str
    gt_source: str | dict = "external"
    label_path: str | None = None

    def __post_init__(self):
        if np.shape(self.input) != np.shape(self.ground_truth):
            raise ValueError("input and ground truth must have equal dimensions")


# --- screening --------------------------------------------------------------


@dataclass
class CandidateRecord:
    operator: OperatorSpec
    smooth: SmoothTestResult
    ssim_vs_original: float

    @property
    def passed(self) -> bool:
        return self.smooth.passed

    @property
    def smooth_score(self) -> float:
        return self.smooth.score

    def to_dict(self) -> dict:
        return {
            "operator": self.operator.to_dict(),
            "smooth_score": _json_float(self.smooth.score),
            "std_part": _json_float(self.smooth.std_part),
            "laplacian_part": _json_float(self.smooth.laplacian_part),
            "windows": self.smooth.windows,
            "passed": self.smooth.passed,
            "reason": self.smooth.reason,
            "ssim_vs_original": self.ssim_vs_original,
        }


@dataclass
class ScreeningReport:
    records: list = field(default_factory=list)
    selected: int | None = None
    threshold: float = SMOOTH_THRESHOLD
    window: WindowSpec = field(default_factory=WindowSpec)
    edge_threshold: float = DEFAULT_EDGE_THRESHOLD
    source: str | None = None

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "source": self.source,
            "threshold": self.threshold,
            "window": {"size": self.window.size, "stride": self.window.stride},
            "edge_threshold": self.edge_threshold,
            "structure_check": STRUCTURE_CHECK,
            "candidates": [r.to_dict() for r in self.records],
            "selected": self.selected,
        }


def _json_float(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


def select_ground_truth(records) -> int | None:
    """Index of the passing record with the largest SSIM (first on ties), or ``None``."""
    best = None
    for i, rec in enumerate(records):
        if rec.passed and (best is None or rec.ssim_vs_original > records[best].ssim_vs_original):
            best = i
    return best


def screen_candidates(original, candidates, w: WindowSpec = WindowSpec(),
                      threshold: float = SMOOTH_THRESHOLD,
                      edge_threshold: float = DEFAULT_EDGE_THRESHOLD) -> ScreeningReport:
    """Run the smooth test and the structure check on every ``(OperatorSpec, image)`` candidate.

    Edge maps come from the Sobel response of each candidate's gray image.
    """
    original = as_image(original)
    if not candidates:
        raise ValueError("at least one candidate is required")
    records = []
    for spec, img in candidates:
        img = as_image(img)
        if img.shape != original.shape:
            raise ValueError(f"candidate {spec.label} has shape {img.shape}, expected {original.shape}")
        gray = gray_plane(img)
        edges = sobel_edges(gray, edge_threshold)
        verdict = smooth_test(gray, edges, w, threshold)
        records.append(CandidateRecord(spec, verdict, ssim(img, original)))
    return ScreeningReport(records, select_ground_truth(records), threshold, w, edge_threshold)


def edge_gt_from_smooth(gt, threshold: float = DEFAULT_EDGE_THRESHOLD) -> np.ndarray:
    """Edge label of a smoothing ground truth: Sobel edges of its gray image."""
    return sobel_edges(gray_plane(gt), threshold)


# --- augmentation -----------------------------------------------------------


def draw_transform(seed: int):
    """``(flip, quarter_turns)`` drawn from the seeded generator."""
    rng = make_rng(seed)
    flip = bool(rng.integers(0, 2))
    turns = int(rng.integers(0, 4))
    return flip, turns


def apply_transform(img, flip: bool, turns: int) -> np.ndarray:
    img = np.asarray(img)
    if flip:
        img = img[:, ::-1]
    return np.ascontiguousarray(np.rot90(img, turns, axes=(0, 1)))


def augment(pair: BlendPair, seed: int) -> BlendPair:
    """Apply one seeded flip/rotation jointly to the input and ground truth."""
    flip, turns = draw_transform(seed)
    return BlendPair(
        apply_transform(pair.input, flip, turns),
        apply_transform(pair.ground_truth, flip, turns),
        pair.texture_id,
        pair.gt_source,
        pair.label_path,
    )


# --- manifests --------------------------------------------------------------


def split_counts(n: int, ratios=DEFAULT_SPLITS) -> dict:
    """Floor each split's share of ``n``; the remainder goes to ``val``."""
    exact = [(name, Fraction(r).limit_denominator(10 ** 6)) for name, r in ratios]
    total = sum(r for _, r in exact)
    counts = {name: math.floor(n * r / total) for name, r in exact}
    leftover = n - sum(counts.values())
    key = "val" if "val" in counts else ratios[0][0]
    counts[key] += leftover
    return counts


def assign_splits(n: int, seed: int, ratios=DEFAULT_SPLITS) -> list:
    """Split name per item index, from a seeded shuffle."""
    order = make_rng(seed).permutation(n)
    counts = split_counts(n, ratios)
    labels = [None] * n
    pos = 0
    for name, _ in ratios:
        for idx in order[pos:pos + counts[name]]:
            labels[int(idx)] = name
        pos += counts[name]
    return labels


def build_manifest(pairs, out_dir, seed: int = 0, ratios=DEFAULT_SPLITS, ext: str = ".png") -> Path:
    """Write every pair's images under ``out_dir`` plus ``manifest.jsonl``.

    Records appear in pair order; paths are relative to ``out_dir``.
    """
    out_dir = Path(out_dir)
    (out_dir / "input").mkdir(parents=True, exist_ok=True)
    (out_dir / "gt").mkdir(parents=True, exist_ok=True)
    splits = assign_splits(len(pairs), seed, ratios)
    lines = []
    for i, (pair, split) in enumerate(zip(pairs, splits)):
        in_rel = f"input/{i:05d}{ext}"
        gt_rel = f"gt/{i:05d}{ext}"
        save_image(pair.input, out_dir / in_rel)
        save_image(pair.ground_truth, out_dir / gt_rel)
        source = pair.gt_source.to_dict() if isinstance(pair.gt_source, OperatorSpec) else pair.gt_source
        record = {
            "schema": SCHEMA,
            "input_path": in_rel,
            "gt_path": gt_rel,
            "texture_id": pair.texture_id,
            "gt_source": source,
            "split": split,
        }
        if pair.label_path is not None:
            record["label_path"] = pair.label_path
        lines.append(json.dumps(record, sort_keys=True))
    path = out_dir / "manifest.jsonl"
    path.write_text("".join(line + "\n" for line in lines))
    return path


def read_manifest(path) -> list:
    """Parse a JSON-lines manifest; relative image paths resolve against its directory."""
    path = Path(path)
    records = []
    for n, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        rec = json.loads(line)
        for key in ("input_path", "gt_path"):
            if key not in rec:
                raise ValueError(f"{path}:{n}: record lacks {key!r}")
        rec["_input"] = str((path.parent / rec["input_path"]).resolve())
        rec["_gt"] = str((path.parent / rec["gt_path"]).resolve())
        records.append(rec)
    return records
