"""Table and figure writers for pipeline artifacts.

Tables are UTF-8 CSV; figures are standalone SVG. Every figure is drawn
from a table written alongside it.
"""

from __future__ import annotations

import csv
import datetime as dt
from pathlib import Path
from typing import Sequence

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .analytics import quadratic_spline  # noqa: E402

plt.rcParams["svg.hashsalt"] = "simcase"
plt.rcParams["svg.fonttype"] = "none"

KINDS = ("metrics", "thresholds", "timeseries", "correlation", "frequency", "breakdown", "importance", "lime")


class ReportError(ValueError):
    pass


def fmt(x: float) -> str:
    return repr(float(x))


def pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def artifact_name(kind: str, bp_id: str | None = None, model: str | None = None,
                  extra: str | None = None, ext: str = "csv") -> str:
    if kind not in KINDS:
        raise ReportError(f"unknown artifact kind {kind!r}")
    parts = [kind] + [p for p in (bp_id, model, extra) if p]
    return "_".join(parts) + "." + ext


def write_table(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    if not rows:
        raise ReportError(f"refusing to write empty table {path.name}")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def read_table(path: Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "simcase"})
    plt.close(fig)
    return path


def plot_timeseries(path: Path, bin_starts: Sequence[dt.date], bin_ends: Sequence[dt.date],
                    series: dict[str, np.ndarray], publication_date: dt.date | None = None,
                    title: str = "") -> Path:
    """Histogram bars for citation columns, spline curves for every column.

    Columns ending in ``_initial`` are dashed and ``_tuned`` solid.
    """
    if not series or len(bin_starts) == 0:
        raise ReportError("no time series to plot")
    starts = np.array([d.toordinal() for d in bin_starts], dtype=float)
    ends = np.array([d.toordinal() for d in bin_ends], dtype=float)
    mids = (starts + ends) / 2
    grid = np.linspace(mids[0], mids[-1], max(200, 20 * len(mids)))
    fig, ax = plt.subplots(figsize=(9, 4))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    models = sorted({n.rsplit("_", 1)[0] for n in series if n.endswith(("_initial", "_tuned"))})
    for name, counts in series.items():
        counts = np.asarray(counts, dtype=float)
        if name.endswith(("_initial", "_tuned")):
            model, variant = name.rsplit("_", 1)
            color = colors[models.index(model) % len(colors)]
            style = "--" if variant == "initial" else "-"
            label = model if variant == "tuned" else None
        else:
            ax.bar(starts, counts, width=ends - starts, align="edge", alpha=0.25, color="gray",
                   edgecolor="none", label=name)
            color, style, label = "black", ":", None
        if len(mids) >= 2:
            ax.plot(grid, quadratic_spline(mids, counts)(grid), style, color=color, lw=1.2, label=label)
    if publication_date is not None:
        ax.axvline(publication_date.toordinal(), color="red", lw=0.8)
    years = range(bin_starts[0].year, bin_ends[-1].year + 1, max(1, (bin_ends[-1].year - bin_starts[0].year) // 10))
    ax.set_xticks([dt.date(y, 1, 1).toordinal() for y in years])
    ax.set_xticklabels([str(y) for y in years])
    ax.set_ylabel("documents")
    ax.set_title(title)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    return _save(fig, path)


def plot_heatmaps(path: Path, panels: dict[str, np.ndarray], labels: Sequence[str], vmin: float, vmax: float,
                  title: str = "") -> Path:
    """One heatmap grid per panel (correlation matrices or frequency columns)."""
    if not panels:
        raise ReportError("no matrix to plot")
    n = len(panels)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n + 1, 3.6), squeeze=False)
    im = None
    for ax, (name, M) in zip(axes[0], panels.items()):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        im = ax.imshow(M, vmin=vmin, vmax=vmax, cmap="RdBu_r" if vmin < 0 else "viridis")
        ax.set_title(name, fontsize=8)
        ax.set_yticks(range(len(labels)))
        ax.set_yticklabels(labels, fontsize=7)
        if M.shape[1] == len(labels):
            ax.set_xticks(range(len(labels)))
            ax.set_xticklabels(labels, fontsize=7, rotation=90)
        else:
            ax.set_xticks([])
    fig.colorbar(im, ax=axes[0].tolist(), shrink=0.8)
    fig.suptitle(title, fontsize=9)
    return _save(fig, path)


def plot_breakdown(path: Path, bin_starts: Sequence[dt.date], groups: dict[str, np.ndarray], title: str = "") -> Path:
    if not groups:
        raise ReportError("no breakdown to plot")
    x = np.array([d.toordinal() for d in bin_starts], dtype=float)
    fig, ax = plt.subplots(figsize=(9, 3.5))
    bottom = np.zeros(len(x))
    width = np.diff(x).min() if len(x) > 1 else 180.0
    for name, counts in groups.items():
        counts = np.asarray(counts, dtype=float)
        ax.bar(x, counts, width=width, bottom=bottom, align="edge", label=name)
        bottom += counts
    ax.set_xticks(x[:: max(1, len(x) // 10)])
    ax.set_xticklabels([d.isoformat()[:7] for d in bin_starts][:: max(1, len(x) // 10)], fontsize=7)
    ax.set_title(title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)
