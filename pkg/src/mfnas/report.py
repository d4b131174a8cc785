"""Matplotlib figure rendering for run artifacts.

Figures are written next to the delimited outputs by the CLI; the analysis
module itself stays table-only.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .genome import Genome  # noqa: E402


def save_pareto_figure(pop: Sequence[Genome], path: Path, title: str = "Final population") -> Path:
    f1 = [g.eval.f1 for g in pop]
    f2 = [g.eval.f2 / 1e6 for g in pop]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(f2, f1, s=24, c="tab:blue")
    ax.set_xlabel("parameters (M)")
    ax.set_ylabel("validation error")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_hv_figure(events: Sequence[dict], path: Path) -> Path:
    gens = [e["gen"] for e in events]
    hv = [e["hv"] for e in events]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(gens, hv, marker="o", ms=3)
    ax.set_xlabel("generation")
    ax.set_ylabel("hypervolume")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_tau_figure(taus: Sequence[float], path: Path) -> Path:
    epochs = list(range(1, len(taus) + 1))
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(epochs, taus, marker="o", ms=3)
    ax.set_xlabel("training epochs")
    ax.set_ylabel("Kendall's tau vs final ranking")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def save_sweep_figure(rows: Sequence[dict], path: Path) -> Path:
    mf = [r["mf"] for r in rows]
    fig, ax1 = plt.subplots(figsize=(5.5, 4))
    ax1.plot(mf, [r["cost_reduction"] for r in rows], marker="o", ms=4,
             color="tab:blue", label="cost reduction")
    ax1.set_xlabel("number of fidelities")
    ax1.set_ylabel("cost reduction ratio", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(mf, [r["tau"] for r in rows], marker="s", ms=4,
             color="tab:red", label="Kendall's tau")
    ax2.set_ylabel("Kendall's tau", color="tab:red")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
