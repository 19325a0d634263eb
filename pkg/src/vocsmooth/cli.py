"""Command-line front end.

Exit codes: 0 success, 1 pipeline produced no samples, 2 bad arguments,
3 IO failure, 4 numerical failure.

Options may also come from a JSON config file (``--config``) whose keys are
option names with dashes replaced by underscores; explicit command-line
values win over the file, and the file wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from . import __version__
from .benchmark import benchmark_manifest, default_operators, json_number
from .contrastive import ContrastiveConfig, FilterBank, contrastive_loss, extract_features, gram, load_features, save_features
from .dataset import (
    DEFAULT_EDGE_THRESHOLD,
    SCHEMA,
    BlendPair,
    blend_texture,
    build_manifest,
    edge_gt_from_smooth,
    read_manifest,
    screen_candidates,
    tile_texture,
)
from .errors import FeatureFormatError, ImageDecodeError, NumericalError
from .imaging import load_image, save_image
from .losses import LossWeights, dtv_terms, edge_loss, reconstruction_terms, seg_cross_entropy, total_loss
from .metrics import SMOOTH_THRESHOLD, WindowSpec, multiscale_pooled_ssim, psnr, smooth_test, ssim
from .pipeline import IMAGE_SUFFIXES, PipelineConfig, build_dataset, list_images
from .smoothing import CANDIDATE_PRESETS, OPERATORS, PRESETS, resolve

log = logging.getLogger("vocsmooth")

EXIT_OK, EXIT_EMPTY, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


# --- helpers ----------------------------------------------------------------


def parse_params(items) -> dict:
    params = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        params[key.strip()] = value.strip()
    return params


def opt(args, name, default=None):
    """Command line > config file > ``default``."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    return args.config_values.get(name, default)


def emit(obj, out=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _window(args):
    return WindowSpec(int(opt(args, "window_size", 16)), int(opt(args, "stride", 8)))


def _operator_list(args, fallback):
    """Operators from repeated ``--preset`` / ``--op`` flags (or ``fallback`` presets)."""
    specs = []
    for p in opt(args, "preset", None) or []:
        try:
            specs.append((p, resolve(preset=p)))
        except KeyError as exc:
            raise UsageError(exc.args[0]) from exc
    for entry in opt(args, "op", None) or []:
        name, _, rest = entry.partition(":")
        params = parse_params([kv for kv in rest.split(",") if kv]) if rest else {}
        try:
            spec = resolve(name=name, params=params)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from exc
        specs.append((spec.label, spec))
    if not specs:
        specs = [(p, PRESETS[p]) for p in fallback]
    return specs


def _load_any_features(path, bank=None):
    path = Path(path)
    if path.suffix.lower() in IMAGE_SUFFIXES:
        return extract_features(load_image(path), bank or FilterBank())
    return load_features(path)


def _load_labels(path):
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path)
    pil = PILImage.open(path)
    if pil.mode not in ("L", "P"):
        raise ImageDecodeError(f"{path}: label map must be 8-bit single channel, got {pil.mode!r}")
    return np.asarray(pil, dtype=np.int64)


# --- subcommands ------------------------------------------------------------


def cmd_smooth(args):
    try:
        spec = resolve(name=args.op_name, preset=args.preset_name, params=parse_params(args.param))
    except KeyError as exc:
        raise UsageError(exc.args[0]) from exc
    src, dst = Path(args.input), Path(args.output)
    if src.is_dir() or src.suffix == ".jsonl":
        if src.is_dir():
            items = [(p, p.name) for p in list_images(src)]
        else:
            items = [(Path(r["_input"]), Path(r["input_path"]).name) for r in read_manifest(src)]
        dst.mkdir(parents=True, exist_ok=True)
        for path, name in items:
            save_image(spec.apply(load_image(path)), dst / Path(name).with_suffix(".png"))
        log.info("smoothed %d images with %s", len(items), spec.label)
    else:
        save_image(spec.apply(load_image(src)), dst)
    return EXIT_OK


def cmd_blend(args):
    gt = load_image(args.gt)
    tex = tile_texture(load_image(args.texture), gt.shape)
    result = blend_texture(gt, tex)
    save_image(result.image, args.output)
    emit({"schema": SCHEMA, "output": str(args.output), "clamp_fraction": result.clamp_fraction}, args.report)
    return EXIT_OK


def _screen(args, original, source):
    specs = _operator_list(args, CANDIDATE_PRESETS)
    candidates = [(spec, spec.apply(original)) for _, spec in specs]
    report = screen_candidates(
        original,
        candidates,
        _window(args),
        float(opt(args, "threshold", SMOOTH_THRESHOLD)),
        float(opt(args, "edge_threshold", DEFAULT_EDGE_THRESHOLD)),
    )
    report.source = source
    return report, candidates


def cmd_screen(args):
    original = load_image(args.original)
    report, candidates = _screen(args, original, Path(args.original).name)
    emit(report.to_dict(), args.output)
    if args.save_gt and report.selected is not None:
        save_image(candidates[report.selected][1], args.save_gt)
    if args.figure:
        from .plotting import plot_screening

        plot_screening(report, args.figure)
    return EXIT_OK


def cmd_dataset_build(args):
    specs = _operator_list(args, CANDIDATE_PRESETS)
    cfg = PipelineConfig(
        operators=[s for _, s in specs],
        window=_window(args),
        threshold=float(opt(args, "threshold", SMOOTH_THRESHOLD)),
        edge_threshold=float(opt(args, "edge_threshold", DEFAULT_EDGE_THRESHOLD)),
        seed=int(opt(args, "seed", 0)),
        threads=int(opt(args, "threads", 1)),
        augment=bool(opt(args, "augment", False)),
    )
    sources, textures, out = opt(args, "sources"), opt(args, "textures"), opt(args, "out")
    if not (sources and textures and out):
        raise UsageError("dataset build needs --sources, --textures and --out")
    result = build_dataset(sources, textures, out, cfg)
    summary = {
        "schema": SCHEMA,
        "manifest": str(result.manifest),
        "pairs": result.pairs,
        "sources": result.sources,
        "selected": result.selected,
        "failures": result.failures,
    }
    emit(summary)
    return EXIT_OK if result.pairs > 0 else EXIT_EMPTY


def _metric_record(a, b, args):
    gray_edges = edge_gt_from_smooth(a, float(opt(args, "edge_threshold", DEFAULT_EDGE_THRESHOLD)))
    verdict = smooth_test(a, gray_edges, _window(args), float(opt(args, "threshold", SMOOTH_THRESHOLD)))
    levels = int(opt(args, "levels", 4))
    return {
        "psnr": json_number(psnr(a, b)),
        "ssim": ssim(a, b),
        "ms_ssim": multiscale_pooled_ssim(a, b, levels),
        "smooth_score": None if math.isnan(verdict.score) else verdict.score,
        "smooth_std": None if math.isnan(verdict.std_part) else verdict.std_part,
        "smooth_laplacian": None if math.isnan(verdict.laplacian_part) else verdict.laplacian_part,
        "smooth_passed": verdict.passed,
    }


def cmd_metric(args):
    if args.manifest:
        rows, psnrs = [], []
        for rec in read_manifest(args.manifest):
            pred, ref = load_image(rec["_input"]), load_image(rec["_gt"])
            rows.append({"input_path": rec["input_path"], **_metric_record(pred, ref, args)})
            psnrs.append(psnr(pred, ref))
        mean_psnr = None
        if rows:
            mean_psnr = json_number(math.inf if any(math.isinf(p) for p in psnrs) else math.fsum(psnrs) / len(psnrs))
        out = {
            "schema": SCHEMA,
            "pairs": len(rows),
            "mean_psnr": mean_psnr,
            "mean_ssim": math.fsum(r["ssim"] for r in rows) / len(rows) if rows else None,
            "records": rows,
        }
    else:
        if not (args.a and args.b):
            raise UsageError("metric needs two images or --manifest")
        out = {"schema": SCHEMA, **_metric_record(load_image(args.a), load_image(args.b), args)}
    emit(out, args.output)
    return EXIT_OK


def cmd_loss(args):
    weights = LossWeights(
        float(opt(args, "lambda_e", 0.001)), float(opt(args, "lambda_c", 1.0)), float(opt(args, "lambda_seg", 1.0))
    )
    gt = load_image(args.gt)
    edge_thr = float(opt(args, "edge_threshold", DEFAULT_EDGE_THRESHOLD))
    if args.edge_gt:
        edges = load_image(args.edge_gt)[:, :, 0] > 0.5
    else:
        edges = edge_gt_from_smooth(gt, edge_thr)
    levels = int(opt(args, "levels", 4))
    parts, details, absent = {}, {}, []

    if args.edge_pred:
        parts["edge"] = edge_loss(load_image(args.edge_pred), edges)
    else:
        absent.append("edge")
    for key, path in (("s0", args.s0), ("s1", args.s1)):
        if path is None:
            absent += [f"re_{key}", f"dtv_{key}"]
            continue
        s = load_image(path)
        re = reconstruction_terms(s, gt, levels)
        dtv = dtv_terms(s, gt, edges)
        parts[f"re_{key}"] = re["l1"] + sum(re["ssim_terms"])
        parts[f"dtv_{key}"] = dtv["l1_edge"] + dtv["tv_nonedge"]
        details[f"re_{key}"] = re
        details[f"dtv_{key}"] = dtv

    anchor = args.anchor or args.s1
    negatives = list(args.negative or [])
    if anchor and negatives:
        cfg = ContrastiveConfig(float(opt(args, "alpha", 0.3)), float(opt(args, "beta", 0.3)), opt(args, "mode", "mean"))
        positive = args.positive or args.gt
        res = contrastive_loss(
            _load_any_features(anchor), _load_any_features(positive), [_load_any_features(n) for n in negatives], cfg
        )
        parts["contrastive"] = res.loss
        details["contrastive"] = res.to_dict()
    else:
        absent.append("contrastive")

    if args.seg_probs and args.seg_labels:
        parts["seg"] = seg_cross_entropy(np.load(args.seg_probs), _load_labels(args.seg_labels))
    else:
        absent.append("seg")

    total, breakdown = total_loss(parts, weights)
    emit({
        "schema": SCHEMA,
        "total": total,
        "parts": {k: parts.get(k, 0.0) for k in breakdown},
        "weighted": breakdown,
        "weights": {"lambda_e": weights.lambda_e, "lambda_c": weights.lambda_c, "lambda_seg": weights.lambda_seg},
        "absent": absent,
        "details": details,
        "notes": {"re": "per-scale term is 1 - SSIM", "dtv": "L1 restricted to edge pixels; TV of prediction on non-edge pixels"},
    }, args.output)
    return EXIT_OK


def _bank(args):
    scales = opt(args, "scales", None)
    if scales is None:
        return FilterBank()
    return FilterBank(tuple(float(s) for s in str(scales).split(",")))


def cmd_features_extract(args):
    f = extract_features(load_image(args.image), _bank(args))
    save_features(f, args.output)
    emit({"schema": SCHEMA, "output": str(args.output), "shape": list(f.shape), "channels": _bank(args).channel_names()})
    return EXIT_OK


def cmd_gram(args):
    f = _load_any_features(args.features, _bank(args))
    g = gram(f)
    emit({"schema": SCHEMA, "layer": args.layer, "channels": int(g.shape[0]), "gram": g.tolist()}, args.output)
    return EXIT_OK


def cmd_closs(args):
    cfg = ContrastiveConfig(float(opt(args, "alpha", 0.3)), float(opt(args, "beta", 0.3)), opt(args, "mode", "mean"))
    bank = _bank(args)
    res = contrastive_loss(
        _load_any_features(args.anchor, bank),
        _load_any_features(args.positive, bank),
        [_load_any_features(n, bank) for n in args.negative],
        cfg,
    )
    emit({"schema": SCHEMA, "layer": args.layer, "mode": cfg.negative_mode, "alpha": cfg.alpha, "beta": cfg.beta,
          **res.to_dict()}, args.output)
    return EXIT_OK


def cmd_benchmark(args):
    from .plotting import plot_benchmark

    specs = _operator_list(args, ()) or default_operators()
    report = benchmark_manifest(args.manifest, specs, int(opt(args, "threads", 1)), opt(args, "split", None))
    out = Path(opt(args, "out", "benchmark"))
    out.mkdir(parents=True, exist_ok=True)
    (out / "benchmark.json").write_text(report.to_json())
    (out / "benchmark.txt").write_text(report.to_text())
    if not opt(args, "no_figure", False):
        plot_benchmark(report, out / "benchmark.png")
    sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_synth(args):
    from .synthetic import mini_voc_smooth

    pairs, gts, textures = mini_voc_smooth(int(args.count), int(args.textures), int(args.size), int(args.seed))
    out = Path(args.out)
    for sub, imgs in (("gts", gts), ("textures", textures)):
        (out / sub).mkdir(parents=True, exist_ok=True)
        for i, img in enumerate(imgs):
            save_image(img, out / sub / f"{i:03d}.png")
    blend_pairs = []
    for k, (inp, gt) in enumerate(pairs):
        i, j = divmod(k, len(textures))
        blend_pairs.append(BlendPair(inp, gt, f"{j:03d}", {"source": f"gts/{i:03d}.png"}))
    manifest = build_manifest(blend_pairs, out / "pairs", int(args.seed))
    emit({"schema": SCHEMA, "manifest": str(manifest), "pairs": len(blend_pairs)})
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _add_window(p):
    p.add_argument("--window-size", type=int, help="edge-free window size in pixels (default 16)")
    p.add_argument("--stride", type=int, help="window stride in pixels (default 8)")
    p.add_argument("--threshold", type=float, help="smooth-test threshold (default 0.05)")
    p.add_argument("--edge-threshold", type=float, help="Sobel magnitude threshold (default 0.1)")


def _add_operators(p):
    p.add_argument("--preset", action="append", help=f"operator preset, repeatable; one of {', '.join(sorted(PRESETS))}")
    p.add_argument("--op", action="append", help="operator as name[:key=value,...], repeatable")


def _add_contrastive(p):
    p.add_argument("--alpha", type=float, help="Gram-term margin (default 0.3)")
    p.add_argument("--beta", type=float, help="expectation-term margin (default 0.3)")
    p.add_argument("--mode", choices=("mean", "min"), help="negative aggregation (default mean)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vocsmooth", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON config file with default option values")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("smooth", help="apply one smoothing operator")
    p.add_argument("input", help="image, directory of images, or manifest.jsonl")
    p.add_argument("output", help="output image, or directory in batch mode")
    p.add_argument("--op", dest="op_name", help=f"operator name: {', '.join(OPERATORS)}")
    p.add_argument("--preset", dest="preset_name", help="named parameter preset")
    p.add_argument("--param", action="append", help="operator parameter key=value, repeatable")
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("blend", help="blend a texture layer onto a ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--texture", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--report", help="write the JSON summary here instead of stdout")
    p.set_defaults(func=cmd_blend)

    p = sub.add_parser("screen", help="generate candidates and select a ground truth")
    p.add_argument("original")
    _add_operators(p)
    _add_window(p)
    p.add_argument("-o", "--output", help="screening report path (default stdout)")
    p.add_argument("--save-gt", help="write the selected candidate here")
    p.add_argument("--figure", help="write a score/SSIM scatter plot here")
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("dataset", help="dataset construction")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    b = dsub.add_parser("build", help="screen sources, blend textures, write a manifest")
    b.add_argument("--sources")
    b.add_argument("--textures")
    b.add_argument("--out")
    b.add_argument("--seed", type=int)
    b.add_argument("--threads", type=int)
    b.add_argument("--augment", action="store_true", default=None)
    _add_operators(b)
    _add_window(b)
    b.set_defaults(func=cmd_dataset_build)

    p = sub.add_parser("metric", help="PSNR / SSIM / pooled SSIM / smoothness of image pairs")
    p.add_argument("a", nargs="?", help="prediction image")
    p.add_argument("b", nargs="?", help="reference image")
    p.add_argument("--manifest", help="score every input/gt pair of a manifest")
    p.add_argument("--levels", type=int)
    _add_window(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("loss", help="evaluate every supervision term against ground truth")
    p.add_argument("--gt", required=True, help="smoothing ground truth")
    p.add_argument("--s0", help="first-stage prediction")
    p.add_argument("--s1", help="final prediction (also the default contrastive anchor)")
    p.add_argument("--edge-pred", help="edge probability map (gray image)")
    p.add_argument("--edge-gt", help="binary edge map; default: Sobel edges of --gt")
    p.add_argument("--anchor", help="anchor features (FMAP or image)")
    p.add_argument("--positive", help="positive features (default: --gt)")
    p.add_argument("--negative", action="append", help="negative features (FMAP or image), repeatable")
    p.add_argument("--seg-probs", help="class probabilities, .npy of shape (H, W, K)")
    p.add_argument("--seg-labels", help="label map (.png 8-bit or .npy), 255 = ignore")
    p.add_argument("--lambda-e", type=float)
    p.add_argument("--lambda-c", type=float)
    p.add_argument("--lambda-seg", type=float)
    p.add_argument("--levels", type=int)
    p.add_argument("--edge-threshold", type=float)
    _add_contrastive(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("features", help="feature extraction")
    fsub = p.add_subparsers(dest="features_command", required=True)
    e = fsub.add_parser("extract", help="filter-bank features of an image to FMAP")
    e.add_argument("image")
    e.add_argument("-o", "--output", required=True)
    e.add_argument("--scales", help="comma-separated Gaussian scales (default 1,2,4)")
    e.set_defaults(func=cmd_features_extract)

    p = sub.add_parser("gram", help="Gram matrix of a feature map")
    p.add_argument("features", help="FMAP file or image")
    p.add_argument("--layer", help="opaque layer name recorded in the output")
    p.add_argument("--scales")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("closs", help="contrastive loss of anchor/positive/negatives")
    p.add_argument("--anchor", required=True)
    p.add_argument("--positive", required=True)
    p.add_argument("--negative", action="append", required=True)
    p.add_argument("--layer")
    p.add_argument("--scales")
    _add_contrastive(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_closs)

    p = sub.add_parser("benchmark", help="mean PSNR/SSIM per operator over a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="report directory (default ./benchmark)")
    p.add_argument("--threads", type=int)
    p.add_argument("--split", help="only records of this split")
    p.add_argument("--seed", type=int, help="accepted for interface symmetry; the benchmark draws no randomness")
    p.add_argument("--no-figure", action="store_true", default=None)
    _add_operators(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("synth", help="write a synthetic desk-scale ground-truth/texture set and its manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--textures", type=int, default=5)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        args.config_values = {}
        if args.config:
            args.config_values = json.loads(Path(args.config).read_text())
            if not isinstance(args.config_values, dict):
                raise UsageError(f"{args.config}: config must be a JSON object")
        return args.func(args)
    except UsageError as exc:
        print(f"vocsmooth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ImageDecodeError, FeatureFormatError) as exc:
        print(f"vocsmooth: io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"vocsmooth: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        msg = exc.args[0] if exc.args else exc
        print(f"vocsmooth: error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
