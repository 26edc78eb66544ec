"""Matplotlib figure rendering for the CLI report paths (Agg backend, files only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_history_figure(history, path) -> None:
    """Training loss (and validation AUC, when recorded) per epoch."""
    epochs = [row["epoch"] for row in history.entries]
    losses = [row["loss"] for row in history.entries]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, losses, color="tab:blue", label="loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    vals = [(r["epoch"], r["val_auc"]) for r in history.entries if "val_auc" in r]
    if vals:
        ax2 = ax.twinx()
        ax2.plot(*zip(*vals), color="tab:orange", label="val AUC")
        ax2.set_ylabel("val AUC")
    ax.set_title("training history")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_sweep_figure(rows, path) -> None:
    """Hyperedge scale (and optional AUC) against the P cap."""
    ps = [row["P"] for row in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ps, [row["sum_members"] for row in rows], "o-", label="total members")
    ax.plot(ps, [row["n_expanded_edges"] for row in rows], "s-", label="expanded edges")
    ax.set_xlabel("P")
    ax.set_ylabel("count")
    ax.legend(loc="upper left")
    if all("auc" in row for row in rows):
        ax2 = ax.twinx()
        ax2.plot(ps, [row["auc"] for row in rows], "d--", color="tab:red", label="AUC")
        ax2.set_ylabel("AUC")
        ax2.set_ylim(0, 1)
    ax.set_title("P-uniform sweep")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_ablation_figure(reports: dict, path) -> None:
    """Grouped AUC/AP bars per ablation variant."""
    variants = list(reports)
    aucs = [reports[v].mean_auc for v in variants]
    aps = [reports[v].mean_ap for v in variants]
    x = range(len(variants))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar([i - 0.2 for i in x], aucs, width=0.4, label="AUC")
    ax.bar([i + 0.2 for i in x], aps, width=0.4, label="AP")
    ax.set_xticks(list(x))
    ax.set_xticklabels(variants, rotation=20)
    ax.set_ylim(0, 1)
    ax.legend()
    ax.set_title("ablation variants")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metrics_figure(report, path) -> None:
    """Per-test-snapshot AUC/AP bars for one evaluation report."""
    ts = [row["t"] for row in report.per_snapshot]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([t - 0.2 for t in ts], [r["auc"] for r in report.per_snapshot], width=0.4, label="AUC")
    ax.bar([t + 0.2 for t in ts], [r["ap"] for r in report.per_snapshot], width=0.4, label="AP")
    ax.set_xlabel("test snapshot")
    ax.set_xticks(ts)
    ax.set_ylim(0, 1)
    ax.legend()
    ax.set_title(f"{report.mode} prediction, mean AUC {report.mean_auc:.3f}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
