"""Report figures and their underlying plot data.

Every figure is emitted twice: a delimited CSV with the time axis plus
the plotted series (for external tools) and a rendered PNG. Rendering is
headless and deterministic given the same inputs.
"""

from __future__ import annotations

import logging
from datetime import date
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .market import PeakSet, VolumeSeries
from .topic_series import TopicSeries

log = logging.getLogger(__name__)

_DPI = 120


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _fmt(x) -> str:
    if isinstance(x, float) or isinstance(x, np.floating):
        return repr(float(x))
    return str(x)


def _save(fig, png_path: Path) -> None:
    fig.tight_layout()
    fig.savefig(png_path, dpi=_DPI)
    plt.close(fig)
    log.debug("wrote %s", png_path)


def volume_overview(series: VolumeSeries, csv_path: Path, png_path: Path, title: str = "") -> None:
    """Raw and normalized daily trading volume on a shared time axis."""
    rows = (
        [d.isoformat(), _fmt(int(r)), _fmt(n)]
        for d, r, n in zip(series.dates, series.raw, series.normalized)
    )
    _write_csv(csv_path, ["date", "raw", "normalized"], rows)

    fig, axes = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
    axes[0].plot(series.dates, series.raw, lw=0.7, color="tab:blue")
    axes[0].set_ylabel("shares traded")
    axes[1].plot(series.dates, series.normalized, lw=0.7, color="tab:orange")
    axes[1].set_ylabel("volume / moving median")
    axes[1].set_xlabel("date")
    if title:
        axes[0].set_title(title)
    _save(fig, png_path)


def topic_series_panel(
    series: TopicSeries,
    topic_ids: list[int],
    csv_path: Path,
    png_path: Path,
    labels: dict[int, str] | None = None,
) -> None:
    """Daily news volume of the given topics, one panel per topic."""
    header = ["date"] + [f"topic_{k}" for k in topic_ids]
    rows = (
        [series.dates[t].isoformat()] + [_fmt(int(series.matrix[k, t])) for k in topic_ids]
        for t in range(len(series.dates))
    )
    _write_csv(csv_path, header, rows)

    n = max(1, len(topic_ids))
    fig, axes = plt.subplots(n, 1, figsize=(10, 1.8 * n), sharex=True, squeeze=False)
    for ax, k in zip(axes[:, 0], topic_ids):
        ax.plot(series.dates, series.matrix[k], lw=0.7)
        name = labels.get(k, "") if labels else ""
        ax.set_ylabel(f"topic {k}", fontsize=8)
        if name:
            ax.set_title(name, fontsize=8, loc="left")
    axes[-1, 0].set_xlabel("date")
    _save(fig, png_path)


def peaks_timeline(
    series: VolumeSeries, peaks: PeakSet, csv_path: Path, png_path: Path, title: str = ""
) -> None:
    """Normalized volume with detected peak days flagged."""
    mask = peaks.mask(series.dates)
    rows = (
        [d.isoformat(), _fmt(n), str(int(flag))]
        for d, n, flag in zip(series.dates, series.normalized, mask)
    )
    _write_csv(csv_path, ["date", "normalized", "is_peak"], rows)

    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(series.dates, series.normalized, lw=0.7, color="tab:gray")
    idx = np.nonzero(mask)[0]
    ax.plot(
        [series.dates[i] for i in idx], series.normalized[idx],
        "o", ms=3, color="tab:red", label="peak day",
    )
    ax.set_xlabel("date")
    ax.set_ylabel("normalized volume")
    ax.legend(loc="upper right")
    if title:
        ax.set_title(title)
    _save(fig, png_path)


def fit_vs_actual(
    dates: list[date],
    observed: np.ndarray,
    fitted: np.ndarray,
    csv_path: Path,
    png_path: Path,
    title: str = "",
) -> None:
    """Observed normalized volume against the news-topic regression fit."""
    rows = (
        [d.isoformat(), _fmt(y), _fmt(f)]
        for d, y, f in zip(dates, observed, fitted)
    )
    _write_csv(csv_path, ["date", "observed", "fitted"], rows)

    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(dates, observed, lw=0.7, color="tab:gray", label="observed")
    ax.plot(dates, fitted, lw=0.9, color="tab:green", label="fitted")
    ax.set_xlabel("date")
    ax.set_ylabel("normalized volume")
    ax.legend(loc="upper right")
    if title:
        ax.set_title(title)
    _save(fig, png_path)
