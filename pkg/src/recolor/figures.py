"""Render report figures next to their delimited outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_loss_curves(metrics_rows: list[dict], out_png) -> Path:
    """Training curves: color error, class KL, and the adversarial terms."""
    steps = [row["step"] for row in metrics_rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(steps, [r["color_error"] for r in metrics_rows], label="color error")
    ax1.plot(steps, [r["class_kl"] for r in metrics_rows], label="class KL")
    ax1.set_xlabel("step")
    ax1.set_yscale("log")
    ax1.legend()
    ax2.plot(steps, [r["total_critic"] for r in metrics_rows], label="critic total")
    ax2.plot(steps, [r["adv_generator"] for r in metrics_rows], label="generator adv")
    ax2.plot(steps, [r["gradient_penalty"] for r in metrics_rows], label="gradient penalty")
    ax2.set_xlabel("step")
    ax2.legend()
    fig.tight_layout()
    out_png = Path(out_png)
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return out_png


def render_psnr_figure(report, out_png) -> Path:
    """Histogram of per-image chroma PSNR, model vs. zero-chroma baseline."""
    fig, ax = plt.subplots(figsize=(6, 4))
    model = [s.psnr for s in report.scores]
    baseline = [s.baseline_psnr for s in report.scores]
    ax.hist([model, baseline], bins=20, label=["model", "zero-chroma baseline"])
    ax.axvline(report.mean_psnr, color="C0", linestyle="--")
    ax.axvline(report.baseline_mean_psnr, color="C1", linestyle="--")
    ax.set_xlabel("PSNR (dB)")
    ax.set_ylabel("images")
    ax.legend()
    fig.tight_layout()
    out_png = Path(out_png)
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return out_png


def render_naturalness_figure(rows: list[dict], out_png) -> Path:
    """Bar chart of per-method naturalness percentages."""
    judged = [r for r in rows if r["naturalness_pct"] is not None]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([r["method_id"] for r in judged], [r["naturalness_pct"] for r in judged])
    ax.set_ylabel("naturalness (%)")
    ax.set_ylim(0, 100)
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    out_png = Path(out_png)
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return out_png
