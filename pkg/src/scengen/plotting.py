"""Static SVG figures: stability box plots and original-vs-reduced overlays."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .stats import ScenarioSet  # noqa: E402

# fixed ids and no timestamp keep repeated renders byte-identical
matplotlib.rcParams["svg.hashsalt"] = "scengen"
_META = {"Date": None, "Creator": None}


def _save(fig, path: str | Path) -> None:
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def stability_boxplots(report, path: str | Path) -> None:
    """In-sample and out-of-sample objective distributions per method and norm."""
    groups = sorted({(r["method"], r["norm"]) for r in report.rows})
    labels = [f"{m}\n{n}" for m, n in groups]
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=False)
    for ax, col, title in zip(axes, ("in_sample", "out_of_sample"), ("In-sample", "Out-of-sample")):
        data = [report.series(m, n, col) for m, n in groups]
        ax.boxplot([d if d.size else [np.nan] for d in data], tick_labels=labels)
        if col == "out_of_sample":
            ax.axhline(report.z_star, color="tab:red", lw=1, ls="--", label="full space")
            ax.legend(loc="best", fontsize=8)
        ax.set_title(title)
        ax.set_ylabel("expected profit")
        ax.ticklabel_format(axis="y", useOffset=False)
    fig.tight_layout()
    _save(fig, path)


def ecdf_overlay(original: ScenarioSet, reduced: ScenarioSet, path: str | Path) -> None:
    """Per-parameter ECDF of original and reduced sets, plus a scatter of the first two parameters."""
    n_par = original.n_params
    panels = n_par + (1 if n_par >= 2 else 0)
    fig, axes = plt.subplots(1, panels, figsize=(4 * panels, 3.6), squeeze=False)
    axes = axes[0]
    for i in range(n_par):
        ax = axes[i]
        for scen, style, label in ((original, "-", "original"), (reduced, "-", "reduced")):
            order = np.argsort(scen.values[:, i], kind="stable")
            x = scen.values[order, i]
            F = np.cumsum(scen.probs[order])
            ax.step(x, F, where="post", ls=style, label=label)
        ax.set_title(original.names[i])
        ax.set_ylabel("ECDF")
        ax.legend(loc="lower right", fontsize=8)
    if n_par >= 2:
        ax = axes[-1]
        ax.scatter(original.values[:, 0], original.values[:, 1], s=4, alpha=0.3, label="original")
        ax.scatter(reduced.values[:, 0], reduced.values[:, 1], s=2000 * reduced.probs, c="tab:orange",
                   edgecolors="k", label="reduced")
        ax.set_xlabel(original.names[0])
        ax.set_ylabel(original.names[1])
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, path)
