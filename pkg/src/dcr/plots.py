"""Matplotlib renderings written next to the delimited report outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

# Fixed PNG metadata so identical runs produce identical bytes.
PNG_METADATA = {"Software": "dcr"}

METRIC_KEYS = ("pra", "srocc", "plcc")


def _save(fig, path):
    fig.savefig(path, metadata=PNG_METADATA)
    plt.close(fig)


def save_label_histograms(hist_blocks: dict[int, tuple], path) -> None:
    """Overlaid per-annotator label histograms from (edges, counts) blocks."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for annotator, (edges, counts) in sorted(hist_blocks.items()):
        centers = [(lo + hi) / 2 for lo, hi in zip(edges[:-1], edges[1:])]
        ax.fill_between(centers, counts, step="mid", alpha=0.35,
                        label=f"annotator {annotator}")
        ax.step(centers, counts, where="mid", linewidth=1.2)
    ax.set_xlabel("annotated score")
    ax.set_ylabel("count")
    ax.set_title("Per-annotator label distributions")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def save_ablation_chart(rows: list[dict], sweep: str, path) -> None:
    """One panel per metric; a line (or bar group) per method over sweep values."""
    methods = sorted({row["method"] for row in rows})
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6), sharex=True)
    for ax, key in zip(axes, METRIC_KEYS):
        for method in methods:
            picked = [row for row in rows if row["method"] == method]
            values = [row[key] for row in picked]
            if sweep == "none":
                ax.bar([f"{m[:12]}" for m in (r["method"] for r in picked)], values,
                       label=method, alpha=0.8)
            else:
                ax.plot([row["value"] for row in picked], values, marker="o", label=method)
        ax.set_title(key.upper())
        if sweep != "none":
            ax.set_xlabel(sweep)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def save_training_curves(history: list[dict], path) -> None:
    """Loss terms per epoch, plus test metrics at the evaluated epochs."""
    epochs = [rec["epoch"] for rec in history]
    loss_keys = sorted(history[0]["loss"]) if history else []
    fig, (ax_loss, ax_metric) = plt.subplots(1, 2, figsize=(10, 4))
    for key in loss_keys:
        ax_loss.plot(epochs, [rec["loss"][key] for rec in history], label=key)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.legend(fontsize=8)
    evaluated = [rec for rec in history if "metrics" in rec]
    for key in METRIC_KEYS:
        ax_metric.plot(
            [rec["epoch"] for rec in evaluated],
            [rec["metrics"]["average"][key] for rec in evaluated],
            marker="o",
            label=key,
        )
    ax_metric.set_xlabel("epoch")
    ax_metric.set_ylabel("test metric")
    ax_metric.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
