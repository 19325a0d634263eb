"""Matplotlib figures written next to the JSON/text reports."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# Fixed metadata keeps repeated renders byte-identical.
_PNG_META = {"Software": None}


def _style(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.tick_params(labelsize=8)


def plot_benchmark(report, path) -> None:
    """Horizontal bars of mean SSIM and mean PSNR per method."""
    labels = [r.label for r in report.rows]
    ssim_vals = [r.mean_ssim for r in report.rows]
    psnr_vals = [r.mean_psnr if math.isfinite(r.mean_psnr) else float("nan") for r in report.rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 0.45 * len(labels) + 1.5), sharey=True)
    ypos = range(len(labels))
    colors = ["0.6" if label == "Original" else "#4477AA" for label in labels]
    ax1.barh(ypos, ssim_vals, color=colors)
    ax1.set_yticks(list(ypos))
    ax1.set_yticklabels(labels)
    ax1.invert_yaxis()
    ax1.set_xlim(0, 1)
    ax1.set_xlabel("mean SSIM")
    ax2.barh(ypos, psnr_vals, color=colors)
    ax2.set_xlabel("mean PSNR (dB)")
    for ax in (ax1, ax2):
        _style(ax)
    fig.suptitle(f"{report.pairs} pairs", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)


def plot_screening(report, path) -> None:
    """Smoothness score vs SSIM scatter for one screening report, threshold marked."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for i, rec in enumerate(report.records):
        score = rec.smooth.score
        if not math.isfinite(score):
            continue
        marker = "*" if i == report.selected else ("o" if rec.passed else "x")
        ax.scatter(score, rec.ssim_vs_original, marker=marker, s=60 if marker == "*" else 25, color="#EE6677" if marker == "*" else "#4477AA")
        ax.annotate(rec.operator.name, (score, rec.ssim_vs_original), fontsize=7, xytext=(3, 3), textcoords="offset points")
    ax.axvline(report.threshold, color="0.5", linestyle="--", linewidth=1)
    ax.set_xlabel("smoothness score")
    ax.set_ylabel("SSIM vs original")
    _style(ax)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
