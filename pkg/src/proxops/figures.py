"""Campaign and run figures rendered to files alongside the CSV/JSON output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .montecarlo import ComparisonReport, MetricsSummary
from .runlog import RunLog


def _plot_arm_trajectories(ax, summary: MetricsSummary, target, anchors, title: str) -> None:
    for rec in summary.records:
        if rec.trajectory is None:
            continue
        ax.plot(rec.trajectory[:, 0], rec.trajectory[:, 1], lw=0.4, alpha=0.35, color="tab:blue")
    ax.plot(*target[:2], marker="s", color="tab:red", ms=8, label="target")
    ax.plot(anchors[:, 0], anchors[:, 1], "k^", ms=6, label="anchors")
    ax.set_title(title)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    ax.legend(loc="lower right", fontsize=8)


def plot_comparison_trajectories(
    report: ComparisonReport, target_position, anchor_positions, out_path: str | Path
) -> Path:
    """Side-by-side x-y paths of the fixed and adaptive campaigns."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.5), sharex=True, sharey=True)
    anchors = np.atleast_2d(anchor_positions)
    _plot_arm_trajectories(axes[0], report.fixed, target_position, anchors, "fixed switching")
    _plot_arm_trajectories(axes[1], report.adaptive, target_position, anchors, "adaptive switching")
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_switching_scatter(summary: MetricsSummary, out_path: str | Path) -> Path:
    """Scatter of the per-run selected switching radii."""
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    r1 = np.array(summary.r1_values)
    r2 = np.array(summary.r2_values)
    ax.scatter(r2, r1, s=12, alpha=0.6)
    ax.set_xlabel("reorient radius r2 [m]")
    ax.set_ylabel("align radius r1 [m]")
    ax.set_title(f"selected switching distances ({summary.n_runs} runs)")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_run_overview(log: RunLog, out_path: str | Path) -> Path:
    """Range, estimation sigma, mode, and force history of a single run."""
    fig, axes = plt.subplots(4, 1, figsize=(8, 9), sharex=True)
    t = log.t
    axes[0].plot(t, log.r_est, lw=0.9)
    axes[0].set_ylabel("range est [m]")
    axes[1].semilogy(t, np.maximum(log.sigma_pos.max(axis=1), 1e-6), lw=0.9)
    axes[1].set_ylabel("max sigma [m]")
    axes[2].step(t, log.mode, where="post", lw=0.9)
    axes[2].set_ylabel("mode")
    axes[2].set_yticks([0, 1, 2, 3, 4])
    axes[2].set_yticklabels(["LOS", "Reorient", "Align", "Terminal", "Complete"], fontsize=7)
    axes[3].plot(t, np.abs(log.force).sum(axis=1), lw=0.7)
    axes[3].set_ylabel("|F| L1 [N]")
    axes[3].set_xlabel("t [s]")
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.suptitle(f"run seed={log.seed} arm={log.arm} status={log.status}")
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_placement(per_layout: dict[str, dict], out_path: str | Path) -> Path:
    """Worst-case align probability and ranging sigma per anchor layout."""
    names = list(per_layout.keys())
    worst_pi = [per_layout[n]["worst_pi_align"] for n in names]
    worst_sig = [per_layout[n]["worst_sigma_pos"] for n in names]
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    axes[0].bar(names, worst_pi, color="tab:blue")
    axes[0].set_ylabel("worst-case align probability")
    axes[1].bar(names, worst_sig, color="tab:orange")
    axes[1].set_ylabel("worst-case max sigma [m]")
    for ax in axes:
        ax.tick_params(axis="x", rotation=30)
        ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    out = Path(out_path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
