"""End-to-end dataset construction: candidates, screening, blending, manifest."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import (
    DEFAULT_EDGE_THRESHOLD,
    DEFAULT_SPLITS,
    BlendPair,
    augment,
    blend_texture,
    build_manifest,
    edge_gt_from_smooth,
    make_rng,
    screen_candidates,
    tile_texture,
)
from .errors import ImageDecodeError, NumericalError
from .imaging import load_image, save_image
from .metrics import SMOOTH_THRESHOLD, WindowSpec
from .smoothing import CANDIDATE_PRESETS, PRESETS

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".ppm", ".pgm", ".pnm")


def list_images(directory) -> list:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


@dataclass
class PipelineConfig:
    operators: list = field(default_factory=lambda: [PRESETS[p] for p in CANDIDATE_PRESETS])
    window: WindowSpec = field(default_factory=WindowSpec)
    threshold: float = SMOOTH_THRESHOLD
    edge_threshold: float = DEFAULT_EDGE_THRESHOLD
    seed: int = 0
    threads: int = 1
    augment: bool = False
    ratios: tuple = DEFAULT_SPLITS


@dataclass
class PipelineResult:
    manifest: Path
    pairs: int
    sources: int
    selected: int
    failures: list


def _screen_source(args):
    path, cfg = args
    try:
        original = load_image(path)
        candidates = [(spec, spec.apply(original)) for spec in cfg.operators]
        report = screen_candidates(original, candidates, cfg.window, cfg.threshold, cfg.edge_threshold)
        report.source = path.name
        gt = candidates[report.selected][1] if report.selected is not None else None
        return path, report, gt, None
    except (OSError, ImageDecodeError, NumericalError, ValueError) as exc:
        return path, None, None, f"{type(exc).__name__}: {exc}"


def build_dataset(sources, textures, out_dir, cfg: PipelineConfig = PipelineConfig()) -> PipelineResult:
    """Screen every source image, blend each selected ground truth with every texture.

    Screening reports go to ``out_dir/reports``, edge labels of the selected
    ground truths to ``out_dir/edges``; the manifest is ``out_dir/manifest.jsonl``.
    Sources that fail to load or process are logged and skipped.
    """
    out_dir = Path(out_dir)
    source_paths = list_images(sources)
    texture_paths = list_images(textures)
    if not texture_paths:
        raise FileNotFoundError(f"no texture images in {textures}")
    texture_imgs = [(p.stem, load_image(p)) for p in texture_paths]

    jobs = [(p, cfg) for p in source_paths]
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            screened = list(pool.map(_screen_source, jobs))
    else:
        screened = [_screen_source(j) for j in jobs]

    (out_dir / "reports").mkdir(parents=True, exist_ok=True)
    (out_dir / "edges").mkdir(parents=True, exist_ok=True)
    failures = []
    pairs = []
    selected = 0
    for path, report, gt, error in screened:
        if error is not None:
            log.error("%s: skipped (%s)", path, error)
            failures.append({"source": path.name, "error": error})
            continue
        (out_dir / "reports" / f"{path.stem}.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
        )
        if gt is None:
            log.info("%s: no candidate passed screening", path.name)
            continue
        selected += 1
        spec = report.records[report.selected].operator
        save_image(edge_gt_from_smooth(gt, cfg.edge_threshold).astype(float), out_dir / "edges" / f"{path.stem}.png")
        for tex_id, tex in texture_imgs:
            blended = blend_texture(gt, tile_texture(tex, gt.shape)).image
            pairs.append(BlendPair(blended, gt, tex_id, {"source": path.name, **spec.to_dict()}))

    if cfg.augment and pairs:
        seeds = make_rng(cfg.seed).integers(0, 2 ** 63, size=len(pairs))
        pairs = [augment(p, int(s)) for p, s in zip(pairs, seeds)]
    manifest = build_manifest(pairs, out_dir, cfg.seed, cfg.ratios)
    return PipelineResult(manifest, len(pairs), len(source_paths), selected, failures)
