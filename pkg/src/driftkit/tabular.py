"""Delimited-text and JSON output for every analysis product.

Floats are written with repr (shortest round-trip form) and manifests carry
no timestamps, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .analysis import DriftMatrix, DriftSeries, TrajectoryPanel
from .divergence import ContributionBreakdown
from .forecast import ForecastReport
from .popularity import PopularityDistribution


def _fmt(x: float) -> str:
    return repr(float(x))


def write_series(path: Path, series: DriftSeries):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_start", "value", "std_error"])
        for p in series.points:
            writer.writerow(
                [p.bin.label, _fmt(p.value), _fmt(p.std_error) if p.std_error is not None else ""]
            )


def read_series_values(path: Path) -> list[tuple[str, float]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        return [(row["bin_start"], float(row["value"])) for row in reader]


def write_matrix(path: Path, matrix: DriftMatrix):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_start"] + [b.label for b in matrix.bins])
        for b, row in zip(matrix.bins, matrix.values):
            writer.writerow([b.label] + [_fmt(v) for v in row])


def write_group_shares(path: Path, rows: list[tuple[str, list[float]]]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_start", "g1", "g2", "g3", "g4", "g5"])
        for label, shares in rows:
            writer.writerow([label] + [_fmt(s) for s in shares])


def write_transitions(path: Path, matrix):
    labels = ["g1", "g2", "g3", "g4", "g5"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group"] + labels)
        for label, row in zip(labels, matrix):
            writer.writerow([label] + [_fmt(v) for v in row])


def write_contributions(path: Path, breakdown: ContributionBreakdown, groups: dict[str, int]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["canonical_id", "partial_bits", "rank", "group"])
        for rank, item in enumerate(breakdown.ranking, start=1):
            writer.writerow([item, _fmt(breakdown.partials[item]), rank, groups[item]])


def write_trajectories(path: Path, panel: TrajectoryPanel):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["canonical_id", "peak_bin"] + [b.label for b in panel.bins])
        for item, peak, row in zip(panel.items, panel.peak_bins, panel.counts):
            writer.writerow([item, peak.label] + [int(c) for c in row])


def write_distributions(path: Path, dists: list[PopularityDistribution]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_start", "canonical_id", "count"])
        for dist in dists:
            label = dist.bin.label
            for item, c in sorted(dist.counts.items(), key=lambda kv: (-kv[1], kv[0])):
                writer.writerow([label, item, c])


def write_mapping(path: Path, mapping: dict[str, str]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_key", "canonical_id"])
        for key in sorted(mapping):
            writer.writerow([key, mapping[key]])


def read_items_table(path: Path) -> list[tuple[str, str, str]]:
    """(item_key, title, creator) rows for the canonicalizer."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"item_key", "title"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns item_key,title[,creator]")
        return [
            (row["item_key"], row["title"], row.get("creator", "") or "")
            for row in reader
        ]


def write_forecast(csv_path: Path, json_path: Path, report: ForecastReport):
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_start", "predicted", "observed", "abs_error"])
        for e in report.entries:
            writer.writerow(
                [e.bin.label, _fmt(e.predicted), _fmt(e.observed), _fmt(e.abs_error)]
            )
    summary = {
        "kind": report.kind,
        "measure": report.measure,
        "n_bins": len(report.entries),
        "mae": report.mae,
        "mape_percent": report.mape,
        "mape_excluded_bins": report.mape_excluded,
        "source_year": report.source_year,
        "target_year": report.target_year,
        "baselines": list(report.baselines),
    }
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_manifest(path: Path, subcommand: str, config_dict: dict, outputs: list[str]):
    manifest = {
        "tool": "driftkit",
        "subcommand": subcommand,
        "config": config_dict,
        "outputs": sorted(outputs),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
