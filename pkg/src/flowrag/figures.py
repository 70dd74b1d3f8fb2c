"""Report figures rendered alongside the delimited outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvalReport


def save_loss_curve(history: list[float], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(history)), history, marker="o", color="tab:blue")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.set_title("Contrastive training loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metrics_bars(report: EvalReport, path: Path) -> None:
    labels = ["Trigger EM", "BofS", "HS", "HT", "Step R@k", "Table R@k"]
    values = [
        report.trigger_em,
        report.bofs,
        report.hs,
        report.ht,
        report.step_recall_at_k,
        report.table_recall_at_k,
    ]
    colors = ["tab:green", "tab:green", "tab:red", "tab:red", "tab:blue", "tab:blue"]
    fig, ax = plt.subplots(figsize=(7, 4))
    bars = ax.bar(labels, values, color=colors)
    for bar, value in zip(bars, values):
        ax.annotate(
            f"{value:.3f}",
            (bar.get_x() + bar.get_width() / 2, bar.get_height()),
            ha="center",
            va="bottom",
            fontsize=8,
        )
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("value")
    ax.set_title(f"Evaluation over {report.sample_count} samples")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_bofs_histogram(report: EvalReport, path: Path) -> None:
    values = [rec["bofs"] for rec in report.per_sample if rec.get("bofs") is not None]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(values, bins=20, range=(0.0, 1.0), color="tab:purple", alpha=0.8)
    ax.set_xlabel("bag-of-steps F1")
    ax.set_ylabel("samples")
    ax.set_title("Per-sample step overlap")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
