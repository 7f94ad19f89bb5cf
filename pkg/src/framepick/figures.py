"""Matplotlib rendering for comparison reports and training logs.

Figures are written next to the CSV/JSON output whenever the CLI emits a
report, so every run leaves a self-contained results directory.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import ComparisonReport
from .trainer import TrainingLog


def _moving_average(values: np.ndarray, window: int) -> np.ndarray:
    if window <= 1 or values.size < window:
        return values
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")


def render_report_figures(report: ComparisonReport, outdir: str | Path) -> list[Path]:
    """Quality-vs-rounds curves and an AUC bar chart; returns file paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    rounds = np.arange(1, report.horizon + 1)
    for name in sorted(report.policies):
        ax.plot(rounds, report.policies[name].curve, marker="o", markersize=3, label=name)
    ax.set_xlabel("round")
    ax.set_ylabel("mean quality")
    ax.set_title(f"quality vs rounds ({report.mode}, {report.n_episodes} episodes)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    curve_path = outdir / "curves.png"
    fig.savefig(curve_path, dpi=150)
    plt.close(fig)
    written.append(curve_path)

    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    names = sorted(report.policies)
    means = [report.policies[n].mean_auc for n in names]
    errs = [report.policies[n].std_auc or 0.0 for n in names]
    ax.bar(names, means, yerr=errs, capsize=4, color="#4878d0")
    ax.set_ylabel("AUC")
    lo = min(means) - max(errs + [0.01]) * 3
    ax.set_ylim(max(0.0, lo), None)
    ax.set_title("mean AUC per policy")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    bar_path = outdir / "auc_bars.png"
    fig.savefig(bar_path, dpi=150)
    plt.close(fig)
    written.append(bar_path)
    return written


def render_training_figures(log: TrainingLog, outdir: str | Path, window: int = 50) -> list[Path]:
    """Smoothed reward and greedy-eval curves over training episodes."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if not log.entries:
        return []
    episodes = np.array([e["episode"] for e in log.entries], dtype=float)
    goal = np.array([e["mean_goal_reward"] for e in log.entries])
    eval_auc = np.array([e["eval_auc"] for e in log.entries])
    eps = np.array([e["epsilon"] for e in log.entries])

    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2))
    for ax, series, label in (
        (axes[0], goal, "mean goal reward"),
        (axes[1], eval_auc, "greedy eval AUC"),
        (axes[2], eps, "epsilon"),
    ):
        smooth = _moving_average(series, window)
        offset = episodes[len(episodes) - len(smooth) :]
        ax.plot(episodes, series, alpha=0.25, linewidth=0.6)
        ax.plot(offset, smooth, linewidth=1.4)
        ax.set_xlabel("episode")
        ax.set_title(label, fontsize=9)
        ax.grid(alpha=0.3)
    fig.tight_layout()
    path = outdir / "training_curves.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]
