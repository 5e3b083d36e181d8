"""Static plot renderers for the report command.

All figures are drawn from previously emitted JSON/CSV artifacts; nothing is
recomputed here.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_training_history(history_json: Path, out_png: Path) -> None:
    hist = json.loads(Path(history_json).read_text())
    epochs = np.arange(1, len(hist["train_loss"]) + 1)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].plot(epochs, hist["train_loss"], label="train")
    if hist["val_loss"]:
        axes[0].plot(epochs, hist["val_loss"], label="val")
    axes[0].set_xlabel("epoch")
    axes[0].set_ylabel("loss")
    axes[0].legend()
    axes[1].plot(epochs, hist["train_acc"], label="train")
    if hist["val_acc"]:
        axes[1].plot(epochs, hist["val_acc"], label="val")
    axes[1].set_xlabel("epoch")
    axes[1].set_ylabel("accuracy")
    axes[1].legend()
    fig.suptitle("Training history")
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def plot_eer_curves(far_frr_csv: Path, out_png: Path) -> None:
    rows = list(csv.DictReader(open(far_frr_csv, newline="")))
    classes = sorted({r["class"] for r in rows}, key=lambda v: int(v))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for c in classes:
        sub = [r for r in rows if r["class"] == c]
        t = [float(r["threshold"]) for r in sub]
        ax.plot(t, [float(r["far"]) for r in sub], alpha=0.5, lw=0.8, color="tab:red")
        ax.plot(t, [float(r["frr"]) for r in sub], alpha=0.5, lw=0.8, color="tab:blue")
    ax.plot([], [], color="tab:red", label="FAR")
    ax.plot([], [], color="tab:blue", label="FRR")
    ax.set_xlabel("threshold")
    ax.set_ylabel("rate")
    ax.set_title("Per-class FAR/FRR")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def plot_confusion(confusion_csv: Path, out_png: Path) -> None:
    with open(confusion_csv, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        names = header[1:]
        matrix = np.array([[int(v) for v in row[1:]] for row in reader])
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(matrix, cmap="Blues")
    ax.set_xticks(range(len(names)), names, rotation=90, fontsize=6)
    ax.set_yticks(range(len(names)), names, fontsize=6)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title("Confusion matrix")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def plot_attack_curve(attack_csv: Path, out_png: Path) -> None:
    rows = list(csv.DictReader(open(attack_csv, newline="")))
    eps = [float(r["epsilon"]) for r in rows]
    acc = [float(r["accuracy"]) for r in rows]
    loss = [float(r["mean_loss"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(eps, acc, marker="o", label="accuracy")
    ax.set_xscale("symlog", linthresh=1e-5)
    ax.set_xlabel("epsilon")
    ax.set_ylabel("accuracy")
    ax2 = ax.twinx()
    ax2.plot(eps, loss, marker="s", color="tab:red", label="mean loss")
    ax2.set_ylabel("mean loss")
    ax.set_title("Robustness vs perturbation budget")
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
