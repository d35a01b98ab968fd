"""Matplotlib rendering of suite reports (PNG files next to the CSVs)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path: Path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def distribution_bars(path, labels, series: dict, title: str, xlabel: str = "configuration"):
    """Grouped bars comparing probability tables over the same atoms."""
    path = Path(path)
    x = np.arange(len(labels))
    width = 0.8 / max(len(series), 1)
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(labels)), 4))
    for i, (name, values) in enumerate(series.items()):
        ax.bar(x + (i - (len(series) - 1) / 2) * width, values, width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=90 if len(labels) > 16 else 0, fontsize=7)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("probability")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def zscore_bars(path, names, zscores, threshold: float, title: str):
    path = Path(path)
    fig, ax = plt.subplots(figsize=(max(6, 0.35 * len(names)), 4))
    ax.bar(np.arange(len(names)), zscores, color="steelblue")
    ax.axhline(threshold, color="firebrick", linestyle="--", label=f"band {threshold:.2f}")
    ax.axhline(-threshold, color="firebrick", linestyle="--")
    ax.set_xticks(np.arange(len(names)))
    ax.set_xticklabels(names, rotation=90, fontsize=7)
    ax.set_ylabel("z-score")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def binned_curve(path, centers, empirical, model, bands, title: str,
                 xlabel: str, ylabel: str):
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(centers, empirical, yerr=bands, fmt="o", capsize=3, label="empirical")
    order = np.argsort(centers)
    ax.plot(np.asarray(centers)[order], np.asarray(model)[order], "-", color="firebrick",
            label="model")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def occupation_histogram(path, samples, title: str):
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(samples, bins=80, density=True, color="steelblue", alpha=0.8)
    ax.set_xlabel("occupation")
    ax.set_ylabel("density")
    ax.set_title(title)
    return _save(fig, path)


def moment_comparison(path, names, a_values, b_values, a_label, b_label, title: str):
    path = Path(path)
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(names)), 4))
    ax.bar(x - 0.2, a_values, 0.4, label=a_label)
    ax.bar(x + 0.2, b_values, 0.4, label=b_label)
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)
