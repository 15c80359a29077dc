"""Matplotlib renderings of the loss traces and the aggregate comparison."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .metrics import METRIC_NAMES, aggregate_improvement

_GAN_CURVES = (
    ("d1_loss_real", "D1 loss (real)"),
    ("d1_loss_fake", "D1 loss (generated)"),
    ("g_loss_d1", "G loss vs D1"),
    ("d2_loss_real", "D2 loss (real)"),
    ("d2_loss_fake", "D2 loss (generated)"),
    ("g_loss_d2", "G loss vs D2"),
)


def loss_curve_figure(trace, title: str, path: Path) -> Path:
    epochs = [r.epoch for r in trace.records]
    fig, (ax, ax_val) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for attr, label in _GAN_CURVES:
        values = [getattr(r, attr) for r in trace.records]
        if all(math.isnan(v) for v in values):
            continue
        ax.plot(epochs, values, label=label)
    ax.set_ylabel("loss")
    ax.legend(fontsize="small")
    ax.set_title(title)
    ax_val.plot(epochs, [r.validation_score for r in trace.records],
                color="black", label="validation score")
    if trace.best_epoch >= 0:
        ax_val.axvline(trace.best_epoch, color="gray", linestyle="--",
                       label=f"selected epoch {trace.best_epoch}")
    ax_val.set_xlabel("epoch")
    ax_val.set_ylabel("validation score")
    ax_val.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def improvement_bar_figure(records: list[dict], path: Path) -> Path | None:
    baseline = [r for r in records if r["config"] == "baseline"]
    gan = [r for r in records if r["config"] != "baseline"]
    if not baseline or not gan:
        return None
    rows = aggregate_improvement(gan, baseline)
    warm_ups = sorted({r["warm_up"] for r in rows})
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / len(warm_ups)
    x = np.arange(len(METRIC_NAMES))
    for i, w in enumerate(warm_ups):
        values = [
            next(r["improvement_pct"] for r in rows
                 if r["metric"] == m and r["warm_up"] == w)
            for m in METRIC_NAMES
        ]
        ax.bar(x + i * width, values, width, label=f"warm-up {w}")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(x + width * (len(warm_ups) - 1) / 2)
    ax.set_xticklabels(METRIC_NAMES)
    ax.set_ylabel("% improvement over baseline")
    ax.set_title("Improvement over baseline (EER: lower is better)")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_figures(traces, records, out_dir) -> list[Path]:
    fig_dir = Path(out_dir) / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for (seed, name), trace in sorted(traces.items()):
        path = fig_dir / f"loss_seed{seed}_{name}.png"
        written.append(loss_curve_figure(trace, f"seed {seed}, {name}", path))
    bar = improvement_bar_figure(records, fig_dir / "improvement.png")
    if bar is not None:
        written.append(bar)
    return written
