"""Quantitative comparison of smoothing operators over a manifest of input/ground-truth pairs.

Every operator is run on every input; mean PSNR and SSIM against the ground
truth are reported per operator, rows sorted by SSIM, with the untouched
input as the ``Original`` row.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import SCHEMA, read_manifest
from .imaging import load_image
from .metrics import psnr, ssim
from .smoothing import PRESETS, OperatorSpec

log = logging.getLogger(__name__)

ORIGINAL = "Original"
TABLE_PRESETS = (("GF", "fig1-gf"), ("RGF", "fig1-rgf"), ("L0", "fig1-l0"), ("RTV", "fig1-rtv"))


@dataclass
class BenchmarkRow:
    label: str
    operator: dict | None
    mean_ssim: float
    mean_psnr: float
    count: int

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "operator": self.operator,
            "mean_ssim": self.mean_ssim,
            "mean_psnr": json_number(self.mean_psnr),
            "count": self.count,
        }


@dataclass
class BenchmarkReport:
    rows: list
    pairs: int
    missing: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "pairs": self.pairs,
            "missing": self.missing,
            "rows": [r.to_dict() for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        header = ("method", "SSIM", "PSNR", "n")
        body = [(r.label, f"{r.mean_ssim:.4f}", _fmt_psnr(r.mean_psnr), str(r.count)) for r in self.rows]
        widths = [max(len(row[i]) for row in [header] + body) for i in range(4)]
        lines = []
        for row in [header] + body:
            cells = [row[0].ljust(widths[0])] + [row[i].rjust(widths[i]) for i in range(1, 4)]
            lines.append("  ".join(cells))
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def json_number(x):
    """JSON-safe float: infinities become the strings ``"inf"`` / ``"-inf"``."""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _fmt_psnr(x):
    return "inf" if math.isinf(x) else f"{x:.4f}"


def default_operators():
    return [(label, PRESETS[name]) for label, name in TABLE_PRESETS]


def _evaluate_pair(args):
    index, inp, gt, operators = args
    scores = [(ssim(inp, gt), psnr(inp, gt))]
    for _, spec in operators:
        out = spec.apply(inp)
        scores.append((ssim(out, gt), psnr(out, gt)))
    return index, scores


def run_benchmark(pairs, operators=None, threads: int = 1) -> BenchmarkReport:
    """Score ``operators`` (``[(label, OperatorSpec)]``) on in-memory ``(input, gt)`` pairs."""
    operators = list(operators or default_operators())
    jobs = [(i, inp, gt, operators) for i, (inp, gt) in enumerate(pairs)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_evaluate_pair, jobs))
    else:
        results = [_evaluate_pair(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    return _aggregate([r[1] for r in results], operators)


def _aggregate(per_pair, operators, missing=()):
    labels = [(ORIGINAL, None)] + [(label, spec.to_dict()) for label, spec in operators]
    rows = []
    for k, (label, op) in enumerate(labels):
        ss = [scores[k][0] for scores in per_pair]
        ps = [scores[k][1] for scores in per_pair]
        mean_s = math.fsum(ss) / len(ss) if ss else math.nan
        mean_p = math.inf if any(math.isinf(p) for p in ps) else (math.fsum(ps) / len(ps) if ps else math.nan)
        rows.append(BenchmarkRow(label, op, mean_s, mean_p, len(ss)))
    rows.sort(key=lambda r: (-r.mean_ssim, r.label))
    return BenchmarkReport(rows, len(per_pair), list(missing))


def benchmark_manifest(manifest, operators=None, threads: int = 1, split: str | None = None) -> BenchmarkReport:
    """Run :func:`run_benchmark` over a JSON-lines manifest.

    Records whose files are missing are listed in ``report.missing`` and
    skipped.  Raises ``FileNotFoundError`` when nothing could be loaded.
    """
    records = read_manifest(manifest)
    if split is not None:
        records = [r for r in records if r.get("split") == split]
    pairs, missing = [], []
    for rec in records:
        absent = [p for p in (rec["_input"], rec["_gt"]) if not Path(p).exists()]
        if absent:
            log.warning("skipping record %s: missing %s", rec["input_path"], ", ".join(absent))
            missing.append({"input_path": rec["input_path"], "gt_path": rec["gt_path"]})
            continue
        pairs.append((load_image(rec["_input"]), load_image(rec["_gt"])))
    if not pairs:
        raise FileNotFoundError(f"{manifest}: no loadable input/ground-truth pairs")
    report = run_benchmark(pairs, operators, threads)
    report.missing = missing
    return report


def ordering_holds(report: BenchmarkReport, order) -> bool:
    """True when the rows labelled ``order`` have strictly decreasing mean SSIM."""
    by_label = {r.label: r.mean_ssim for r in report.rows}
    values = [by_label[label] for label in order]
    return all(a > b for a, b in zip(values, values[1:]))
