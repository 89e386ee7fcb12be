"""Turn sweep summary.csv tables into the four standard figures.

Input is the documented summary schema of the blindmaze experiments:

    switching / nomask:  n_step, blind_prob, seed, mean_length, min_length,
                         max_length, solved, episodes
    maxblind:            n_step, blind_prob, seed, max_blind_solved
    permask:             mask, n_step, blind_prob, seed, lowest_length,
                         mean_length, episodes

Every figure is written as both PNG and SVG next to the requested output
path. The plotted data points are a pure function of the CSV; render()
returns them so callers can check the round trip.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


class SchemaError(ValueError):
    """summary.csv does not match the documented schema."""


REQUIRED_COLUMNS = {
    "switching": ("n_step", "blind_prob", "seed", "mean_length"),
    "maxblind": ("n_step", "blind_prob", "seed", "max_blind_solved"),
    "nomask": ("n_step", "blind_prob", "seed", "mean_length"),
    "permask": ("mask", "n_step", "blind_prob", "seed", "lowest_length"),
}

FIGURES = tuple(REQUIRED_COLUMNS)

Y_LABEL = {
    "switching": "mean episode length (all masks active)",
    "maxblind": "longest blindness mask solved",
    "nomask": "mean episode length (no masks)",
    "permask": "lowest episode length (mean over blind levels)",
}


def read_summary(path, figure):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file, expected a summary header")
        missing = [c for c in REQUIRED_COLUMNS[figure] if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing columns {', '.join(missing)} "
                              f"for figure {figure!r}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def watermark_text(summary_path):
    """Config-hash watermark tracing the image back to its run: the sweep
    manifest hash when present, else a hash of the CSV itself."""
    manifest = os.path.join(os.path.dirname(os.path.abspath(summary_path)), "manifest.json")
    if os.path.exists(manifest):
        with open(manifest) as fh:
            doc = json.load(fh)
        digest = hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:12]
        return f"{doc.get('experiment', 'sweep')} config {digest}"
    with open(summary_path, "rb") as fh:
        return f"summary {hashlib.sha256(fh.read()).hexdigest()[:12]}"


def _line_series(rows, value_column):
    """Per blind level: x = sorted N, y = across-seed mean of value_column,
    with across-seed min/max for the shaded band."""
    grouped = {}
    for row in rows:
        key = (float(row["blind_prob"]), int(row["n_step"]))
        grouped.setdefault(key, []).append(float(row[value_column]))
    series = {}
    for p in sorted({p for p, _ in grouped}):
        ns = sorted(n for pp, n in grouped if pp == p)
        values = [grouped[(p, n)] for n in ns]
        series[f"p={p}"] = {
            "x": ns,
            "y": [float(np.mean(v)) for v in values],
            "lo": [min(v) for v in values],
            "hi": [max(v) for v in values],
        }
    return series


def _permask_series(rows):
    """Per mask: x = sorted N, bar height = mean of lowest_length across blind
    levels (and seeds), error bar = standard deviation across those runs."""
    grouped = {}
    for row in rows:
        key = (row["mask"], int(row["n_step"]))
        grouped.setdefault(key, []).append(float(row["lowest_length"]))
    series = {}
    for mask in sorted({m for m, _ in grouped}):
        ns = sorted(n for mm, n in grouped if mm == mask)
        values = [grouped[(mask, n)] for n in ns]
        series[mask] = {
            "x": ns,
            "y": [float(np.mean(v)) for v in values],
            "std": [float(np.std(v)) for v in values],
        }
    return series


def compute_series(rows, figure):
    if figure == "maxblind":
        return _line_series(rows, "max_blind_solved")
    if figure in ("switching", "nomask"):
        return _line_series(rows, "mean_length")
    if figure == "permask":
        return _permask_series(rows)
    raise SchemaError(f"unknown figure type {figure!r}; have {', '.join(FIGURES)}")


def render(summary_path, figure, out_path):
    """Render one figure; returns the plotted series keyed by curve label.

    Writes <out>.png and <out>.svg (whatever extension out_path carries is
    replaced). No file is written when the CSV is rejected.
    """
    if figure not in FIGURES:
        raise SchemaError(f"unknown figure type {figure!r}; have {', '.join(FIGURES)}")
    rows = read_summary(summary_path, figure)
    series = compute_series(rows, figure)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    if figure == "permask":
        masks = list(series)
        all_ns = sorted({n for s in series.values() for n in s["x"]})
        width = 0.8 / max(1, len(masks))
        for i, mask in enumerate(masks):
            s = series[mask]
            offsets = [all_ns.index(n) + (i - (len(masks) - 1) / 2) * width for n in s["x"]]
            ax.bar(offsets, s["y"], width=width, yerr=s["std"], capsize=2, label=mask)
        ax.set_xticks(range(len(all_ns)))
        ax.set_xticklabels([str(n) for n in all_ns])
    else:
        for label, s in series.items():
            ax.plot(s["x"], s["y"], marker="o", label=label)
            ax.fill_between(s["x"], s["lo"], s["hi"], alpha=0.25)
    ax.set_xlabel("training horizon N")
    ax.set_ylabel(Y_LABEL[figure])
    ax.legend()
    ax.grid(alpha=0.3)
    fig.text(0.99, 0.01, watermark_text(summary_path), ha="right", va="bottom",
             fontsize=6, alpha=0.6)
    fig.tight_layout()
    base, _ = os.path.splitext(out_path)
    for ext in (".png", ".svg"):
        fig.savefig(base + ext)
    plt.close(fig)
    return series
