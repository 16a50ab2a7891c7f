"""Matplotlib rendering for reports: confusion heatmap, per-class bars, PSD.

All functions write image files; nothing is shown interactively.  The Agg
backend is forced so rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evalkit import ConfusionMatrix, EvalReport


def plot_confusion_matrix(cm: ConfusionMatrix, path, title: str = "Confusion matrix"):
    labels = [str(lab) for lab in cm.class_list]
    fig, ax = plt.subplots(figsize=(1.0 + 0.55 * len(labels), 0.8 + 0.55 * len(labels)))
    im = ax.imshow(cm.counts, cmap="Blues")
    ax.set_xticks(range(len(labels)), labels, rotation=45, ha="right")
    ax.set_yticks(range(len(labels)), labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)
    vmax = cm.counts.max() if cm.counts.size else 1
    for i in range(len(labels)):
        for j in range(len(labels)):
            v = cm.counts[i, j]
            if v:
                color = "white" if v > vmax / 2 else "black"
                ax.text(j, i, str(v), ha="center", va="center",
                        color=color, fontsize=8)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_per_class_accuracy(named_reports: list[tuple[str, EvalReport]], path):
    """Grouped bar chart of per-class accuracy, one group per class."""
    labels = [str(lab) for lab in named_reports[0][1].per_class_accuracy]
    x = np.arange(len(labels))
    width = 0.8 / max(len(named_reports), 1)
    fig, ax = plt.subplots(figsize=(1.5 + 0.7 * len(labels), 4.0))
    for i, (name, rep) in enumerate(named_reports):
        vals = list(rep.per_class_accuracy.values())
        ax.bar(x + (i - (len(named_reports) - 1) / 2) * width, vals, width, label=name)
    ax.set_xticks(x, labels)
    ax.set_ylim(0, 105)
    ax.set_ylabel("accuracy (%)")
    ax.set_xlabel("class")
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_psd(freq_hz, power, path, title: str = "AR power spectral density"):
    freq_hz = np.asarray(freq_hz, dtype=float)
    power = np.asarray(power, dtype=float)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    finite = np.isfinite(power)
    ax.semilogy(freq_hz[finite], power[finite])
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("power")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_sweep(values, accuracies, parameter: str, path):
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    ax.plot(values, accuracies, marker="o")
    ax.set_xlabel(parameter)
    ax.set_ylabel("accuracy (%)")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
