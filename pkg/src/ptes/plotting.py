"""Figures for completed runs (matplotlib, file output only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

MAX_PANELS = 6
_GAINS = ("K_T", "L_T", "K_2T")


def plot_run(t, columns: dict, path, title: str = "", marks: dict | None = None) -> Path:
    """One panel per trajectory column (gains share a panel); saved as PNG."""
    names = [n for n in columns if n not in _GAINS][:MAX_PANELS - 1]
    gains = [n for n in _GAINS if n in columns]
    panels = names + (["gains"] if gains else [])
    fig, axes = plt.subplots(len(panels), 1, sharex=True, figsize=(8, 1.8 * len(panels) + 0.6), squeeze=False)
    for ax, name in zip(axes[:, 0], panels):
        if name == "gains":
            for g in gains:
                ax.plot(t, columns[g], lw=0.8, label=g)
            ax.legend(loc="upper right", fontsize="small")
        else:
            ax.plot(t, columns[name], lw=0.8)
            ax.set_ylabel(name)
        for label, tm in (marks or {}).items():
            if label != "T" and tm == tm and t[0] <= tm <= t[-1]:
                ax.axvline(tm, color="0.6", ls="--", lw=0.6)
        ax.grid(True, alpha=0.3)
    axes[-1, 0].set_xlabel("t [s]")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_sweep(points, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    w = [p.omega for p in points]
    ax.loglog(w, [p.nu_theta for p in points], "o-", label="theta error")
    ax.loglog(w, [p.nu_full for p in points], "s--", label="full error state")
    ax.set_xlabel("omega [rad/s]")
    ax.set_ylabel("sup distance to averaged run")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
