"""Optional figure rendering for CLI outputs (requires matplotlib)."""

from __future__ import annotations

import numpy as np


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_trajectories(trajectories, path) -> None:
    """Particle paths (first two coordinates) and |w| against time."""
    plt = _pyplot()
    fig, (ax_y, ax_w) = plt.subplots(1, 2, figsize=(10, 4))
    for i, traj in enumerate(trajectories):
        ax_y.plot(traj.ys[:, 0], traj.ys[:, 1], label=f"particle {i}")
        ax_w.plot(traj.grid.points, np.linalg.norm(traj.ws, axis=1))
    ax_y.set_xlabel("y1")
    ax_y.set_ylabel("y2")
    ax_y.set_title("position")
    ax_y.legend(fontsize="small")
    ax_w.set_xlabel("t")
    ax_w.set_ylabel("|w|")
    ax_w.set_title("relative velocity magnitude")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_report(records, path) -> None:
    """Pass/fail bar chart for a verification report."""
    plt = _pyplot()
    names = [r.name for r in records]
    passed = [r.passed for r in records]
    fig, ax = plt.subplots(figsize=(8, 0.35 * len(names) + 1))
    colors = ["tab:green" if ok else "tab:red" for ok in passed]
    ax.barh(range(len(names)), [1.0] * len(names), color=colors)
    ax.set_yticks(range(len(names)), names, fontsize="small")
    ax.set_xticks([])
    ax.invert_yaxis()
    ax.set_title(f"verification: {sum(passed)}/{len(passed)} passed")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
