"""Figure rendering for scan, trajectory and comparison outputs.

Figures are written next to the CSV/JSON files by the CLI report paths.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import barycentric_xy


def scan_figure(scan, path, markers=None):
    """Fairness over the scanned simplex.

    2 groups: metric value against the first group weight, with optional
    strategy markers {name: lam}. 3 groups: barycentric scatter colored by
    the metric. More groups: metric value against the scan index.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    S = scan.n_groups
    if S == 2:
        ax.plot(scan.lam[:, 0], scan.fairness, color="gray", lw=1.5)
        if markers:
            for name, lam in markers.items():
                k = int(np.argmin(np.abs(scan.lam[:, 0] - lam[0])))
                ax.plot(lam[0], scan.fairness[k], "o", label=name, ms=6)
            ax.legend(fontsize=8)
        ax.set_xlabel("weight of group 0")
    elif S == 3:
        xy = np.array([barycentric_xy(lam) for lam in scan.lam])
        sc = ax.scatter(xy[:, 0], xy[:, 1], c=scan.fairness, s=12, cmap="viridis")
        fig.colorbar(sc, ax=ax, label="unfairness")
        ax.set_aspect("equal")
        ax.set_axis_off()
    else:
        ax.plot(scan.fairness, lw=1.0)
        ax.set_xlabel("scan index")
    ax.set_ylabel("unfairness")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def trajectory_figure(traj, path):
    """Fairness and group losses along a solver run."""
    fig, axes = plt.subplots(1, 2, figsize=(9.6, 3.8))
    t = np.asarray(traj.t)
    axes[0].plot(t, traj.fairness, lw=1.5)
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("unfairness")
    losses = np.asarray(traj.group_losses)
    for a in range(losses.shape[1]):
        axes[1].plot(t, losses[:, a], lw=1.2, label=f"group {a}")
    axes[1].set_xlabel("iteration")
    axes[1].set_ylabel("group loss")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def compare_figure(report, path):
    """Train/test unfairness per strategy."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    names = [r.name for r in report.rows]
    x = np.arange(len(names))
    ax.bar(x - 0.2, [r.train_fairness for r in report.rows], width=0.4, label="train")
    ax.bar(x + 0.2, [r.test_fairness for r in report.rows], width=0.4, label="test")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("unfairness")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
