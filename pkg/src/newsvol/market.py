"""Trading-volume ingestion, moving-median normalization, peak detection.

Daily volume is de-trended by dividing by the median over a moving window
(about two trading years by default). Peak days are then found per
consecutive six-month calendar window as the days strictly above that
window's nearest-rank 95th percentile.
"""

from __future__ import annotations

import calendar
import csv
import json
import logging
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

log = logging.getLogger(__name__)


@dataclass
class VolumeSeries:
    dates: list[date]  # strictly increasing trading days
    raw: np.ndarray  # nonnegative integer shares
    normalized: np.ndarray  # raw / moving-median divisor

    def __post_init__(self):
        if len(self.dates) != len(self.raw) or len(self.raw) != len(self.normalized):
            raise ValueError("dates, raw and normalized must have equal length")
        for a, b in zip(self.dates, self.dates[1:]):
            if b <= a:
                raise ValueError("dates must be strictly increasing")


@dataclass
class PeakSet:
    windows: list[tuple[date, date]]
    thresholds: list[float]  # nearest-rank percentile per window, NaN if empty
    peaks: set[date]

    def sorted_peaks(self) -> list[date]:
        return sorted(self.peaks)

    def mask(self, dates: list[date]) -> np.ndarray:
        return np.array([d in self.peaks for d in dates], dtype=bool)


def _window_offsets(window: int, centered: bool) -> int:
    # index of the position a full window's median belongs to, relative
    # to the window start
    return (window - 1) // 2 if centered else window - 1


def moving_median_normalize(
    dates: list[date],
    raw: np.ndarray,
    window_days: int = 504,
    centered: bool = True,
) -> VolumeSeries:
    """Divide raw volume by a moving median of ``window_days`` observations.

    Positions too near a boundary for a full window adopt the nearest
    fully-computed median; zero medians are replaced by the nearest
    non-zero one (earlier position wins a tie). Raises if no non-zero
    median exists (e.g. an all-zero series).
    """
    raw = np.asarray(raw, dtype=np.float64)
    n = raw.shape[0]
    if n == 0:
        raise ValueError("volume series is empty")
    if window_days < 1:
        raise ValueError("window_days must be >= 1")
    if np.any(raw < 0) or not np.all(np.isfinite(raw)):
        raise ValueError("raw volume must be finite and nonnegative")

    if n >= window_days:
        medians = np.median(sliding_window_view(raw, window_days), axis=1)
        offset = _window_offsets(window_days, centered)
    else:
        medians = np.array([np.median(raw)])
        offset = 0
    nonzero = np.nonzero(medians)[0]
    if nonzero.size == 0:
        raise ValueError("no non-zero moving median exists; cannot normalize")

    positions = np.clip(np.arange(n) - offset, 0, medians.shape[0] - 1)
    divisors = medians[positions]
    zero_at = np.nonzero(divisors == 0)[0]
    for t in zero_at:
        j = positions[t]
        right = np.searchsorted(nonzero, j)
        left = right - 1
        if left < 0:
            pick = nonzero[right]
        elif right >= nonzero.size:
            pick = nonzero[left]
        else:
            # earlier median wins a distance tie
            pick = nonzero[left] if j - nonzero[left] <= nonzero[right] - j else nonzero[right]
        divisors[t] = medians[pick]
    normalized = raw / divisors
    return VolumeSeries(list(dates), np.asarray(raw, dtype=np.int64), normalized)


def add_months(d: date, months: int) -> date:
    month = d.month - 1 + months
    year = d.year + month // 12
    month = month % 12 + 1
    day = min(d.day, calendar.monthrange(year, month)[1])
    return date(year, month, day)


def nearest_rank(values: np.ndarray, percentile: float) -> float:
    """ceil(p/100 * n)-th order statistic, 1-indexed."""
    n = values.shape[0]
    rank = int(np.ceil(percentile / 100.0 * n))
    rank = min(max(rank, 1), n)
    return float(np.sort(values)[rank - 1])


def detect_peaks(
    series: VolumeSeries, window_months: int = 6, percentile: float = 95.0
) -> PeakSet:
    """Partition the calendar into consecutive ``window_months`` windows
    from the first observed date; within each, peak days are those with
    normalized volume strictly above the nearest-rank percentile."""
    if window_months < 1:
        raise ValueError("window_months must be >= 1")
    if not 0.0 < percentile < 100.0:
        raise ValueError("percentile must be in (0, 100)")
    start, last = series.dates[0], series.dates[-1]
    boundaries = [start]
    i = 1
    while boundaries[-1] <= last:
        boundaries.append(add_months(start, i * window_months))
        i += 1
    # boundaries[j] .. boundaries[j+1]-1day is window j
    windows = []
    for j in range(len(boundaries) - 1):
        end = min(boundaries[j + 1] - timedelta(days=1), last)
        windows.append((boundaries[j], end))

    ordinals = np.array([d.toordinal() for d in series.dates])
    bounds = np.array([b.toordinal() for b in boundaries[1:]])
    which = np.searchsorted(bounds, ordinals, side="right")

    thresholds: list[float] = []
    peaks: set[date] = set()
    for j in range(len(windows)):
        in_window = which == j
        values = series.normalized[in_window]
        if values.size == 0:
            thresholds.append(float("nan"))
            continue
        threshold = nearest_rank(values, percentile)
        thresholds.append(threshold)
        for d, v in zip(np.array(series.dates, dtype=object)[in_window], values):
            if v > threshold:
                peaks.add(d)
    log.info("%d peak days across %d windows", len(peaks), len(windows))
    return PeakSet(windows, thresholds, peaks)


def load_volume_csv(path) -> tuple[list[date], np.ndarray]:
    """Read market data: CSV with header columns ``date`` and ``volume``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty market file") from None
        cols = {name.strip().lower(): i for i, name in enumerate(header)}
        if "date" not in cols or "volume" not in cols:
            raise ValueError(f"{path}: header must contain 'date' and 'volume' columns")
        dates: list[date] = []
        raw: list[int] = []
        for row in reader:
            if not row:
                continue
            dates.append(date.fromisoformat(row[cols["date"]].strip()))
            raw.append(int(float(row[cols["volume"]])))
    return dates, np.array(raw, dtype=np.int64)


def save_volume_series(series: VolumeSeries, path, peaks: PeakSet | None = None) -> None:
    """Write date, raw, normalized and, when peaks are given, is_peak."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if peaks is None:
            writer.writerow(["date", "raw", "normalized"])
            for d, r, v in zip(series.dates, series.raw, series.normalized):
                writer.writerow([d.isoformat(), str(int(r)), repr(float(v))])
        else:
            writer.writerow(["date", "raw", "normalized", "is_peak"])
            for d, r, v in zip(series.dates, series.raw, series.normalized):
                flag = "1" if d in peaks.peaks else "0"
                writer.writerow([d.isoformat(), str(int(r)), repr(float(v)), flag])


def load_volume_series(path) -> VolumeSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        dates, raw, norm = [], [], []
        for row in reader:
            if not row:
                continue
            dates.append(date.fromisoformat(row[0]))
            raw.append(int(row[1]))
            norm.append(float(row[2]))
    return VolumeSeries(dates, np.array(raw, dtype=np.int64), np.array(norm))


def save_peaks(peaks: PeakSet, path) -> None:
    payload = {
        "windows": [[a.isoformat(), b.isoformat()] for a, b in peaks.windows],
        "thresholds": [None if np.isnan(t) else t for t in peaks.thresholds],
        "peaks": [d.isoformat() for d in peaks.sorted_peaks()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_peaks(path) -> PeakSet:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    windows = [(date.fromisoformat(a), date.fromisoformat(b)) for a, b in payload["windows"]]
    thresholds = [float("nan") if t is None else float(t) for t in payload["thresholds"]]
    peaks = {date.fromisoformat(d) for d in payload["peaks"]}
    return PeakSet(windows, thresholds, peaks)
