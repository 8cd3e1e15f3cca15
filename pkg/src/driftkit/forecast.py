"""Seasonal-naive drift prediction: next year's drift equals last year's.

A target bin is predicted by the source-series value at the same calendar
position: month number for monthly series, quarter number for quarterly,
ISO week number for weekly (week 53 falls back to week 52 when the source
year has only 52 weeks). Prediction is pure re-indexing; no value appears
in the output that is not already in the source series.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .analysis import DriftSeries, SeriesPoint
from .events import TimeBin


def calendar_position(bin: TimeBin) -> int:
    if bin.granularity == "month":
        return bin.start.month
    if bin.granularity == "quarter":
        return (bin.start.month - 1) // 3 + 1
    if bin.granularity == "week":
        return bin.start.isocalendar()[1]
    raise ValueError(f"unknown granularity {bin.granularity!r}")


def predict_drift(source: DriftSeries, target_bins: list[TimeBin]) -> DriftSeries:
    """Predict each target bin's drift from the same calendar position a cycle earlier."""
    by_position: dict[int, float] = {}
    for point in source.points:
        pos = calendar_position(point.bin)
        if pos not in by_position:
            by_position[pos] = point.value
    points = []
    for bin in target_bins:
        pos = calendar_position(bin)
        if pos not in by_position and bin.granularity == "week" and pos == 53:
            pos = 52
        if pos not in by_position:
            warnings.warn(
                f"no source value for calendar position of {bin.label}; bin omitted",
                stacklevel=2,
            )
            continue
        points.append(SeriesPoint(bin, by_position[pos]))
    return DriftSeries(source.kind, source.measure, points, baseline=source.baseline)


@dataclass(frozen=True)
class ForecastEntry:
    bin: TimeBin
    predicted: float
    observed: float

    @property
    def abs_error(self) -> float:
        return abs(self.predicted - self.observed)


@dataclass
class ForecastReport:
    """Per-bin errors plus MAE and MAPE (percent, zero-observed bins excluded)."""

    kind: str
    measure: str
    entries: list[ForecastEntry]
    mae: float
    mape: float | None
    mape_excluded: int
    source_year: int | None = None
    target_year: int | None = None
    baselines: tuple[str, ...] = ()


def score(
    predicted: DriftSeries,
    observed: DriftSeries,
    source_year: int | None = None,
    target_year: int | None = None,
    baselines: tuple[str, ...] = (),
) -> ForecastReport:
    """Compare predicted and observed series on their shared bins."""
    obs_by_start = {p.bin.start: p.value for p in observed.points}
    entries = []
    for point in predicted.points:
        if point.bin.start in obs_by_start:
            entries.append(ForecastEntry(point.bin, point.value, obs_by_start[point.bin.start]))
    if not entries:
        raise ValueError("predicted and observed series share no bins")
    mae = math.fsum(e.abs_error for e in entries) / len(entries)
    nonzero = [e for e in entries if e.observed != 0.0]
    mape = (
        100.0 * math.fsum(e.abs_error / abs(e.observed) for e in nonzero) / len(nonzero)
        if nonzero
        else None
    )
    return ForecastReport(
        observed.kind,
        observed.measure,
        entries,
        mae,
        mape,
        len(entries) - len(nonzero),
        source_year,
        target_year,
        baselines,
    )
