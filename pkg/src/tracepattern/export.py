"""File exports: matrix CSVs, GeoJSON heatmap layers, time-series CSV/SVG.

Every writer is deterministic: identical inputs produce byte-identical
files (verified via manifest digests).
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import json

import numpy as np

from .errors import ExportError
from .ingest import IntervalIndex
from .patterns import SpatioTemporalMatrix


def write_matrix_csv(matrix: SpatioTemporalMatrix, path, metadata: dict | None = None):
    """Write a matrix as CSV (header: road_id + interval labels) plus an
    optional ``<path>.meta.json`` sidecar."""
    integral = np.issubdtype(matrix.values.dtype, np.integer)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["road_id"] + matrix.interval_labels())
        for rid, row in zip(matrix.road_ids, matrix.values):
            if integral:
                w.writerow([rid] + [int(v) for v in row])
            else:
                w.writerow([rid] + [repr(float(v)) for v in row])
    if metadata is not None:
        with open(f"{path}.meta.json", "w", encoding="utf-8") as fh:
            json.dump(metadata, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


def read_matrix_csv(path) -> SpatioTemporalMatrix:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ExportError(f"{path} is empty")
    intervals = [IntervalIndex.from_label(lbl) for lbl in rows[0][1:]]
    road_ids = []
    values = []
    for row in rows[1:]:
        road_ids.append(int(row[0]))
        values.append([float(v) for v in row[1:]])
    grid = np.asarray(values) if road_ids else np.empty((0, len(intervals)))
    return SpatioTemporalMatrix(road_ids, intervals, grid)


def export_heatmap(matrix: SpatioTemporalMatrix, network, interval_label: str) -> dict:
    """One-interval GeoJSON layer: a line feature per road with its value
    and the ratio to the matrix-wide maximum."""
    labels = matrix.interval_labels()
    try:
        col = labels.index(interval_label)
    except ValueError:
        raise ExportError(f"interval {interval_label!r} not in matrix") from None
    overall_max = float(matrix.values.max(initial=0.0))
    features = []
    for rid, row in zip(matrix.road_ids, matrix.values):
        seg = network.segments[rid]
        value = float(row[col])
        features.append({
            "type": "Feature",
            "properties": {
                "road_id": rid,
                "value": value,
                "ratio": value / overall_max if overall_max > 0 else 0.0,
            },
            "geometry": {
                "type": "LineString",
                "coordinates": [[lon, lat] for lat, lon in seg.polyline],
            },
        })
    return {"type": "FeatureCollection",
            "properties": {"interval": interval_label, "max_value": overall_max},
            "features": features}


def export_timeseries(day_matrix, days, csv_path, svg_path, title, y_label):
    """Scatter CSV (slot label, day, value) and an SVG overlay of all days.

    ``day_matrix`` is (n_days, n_slots); both files are byte-stable.
    """
    day_matrix = np.asarray(day_matrix, dtype=np.float64)
    n_days, n_slots = day_matrix.shape
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "day", "value"])
        for d in range(n_days):
            for s in range(n_slots):
                w.writerow([s, str(days[d]), repr(float(day_matrix[d, s]))])
    with open(svg_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_svg(day_matrix, days, title, y_label))


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def render_svg(day_matrix, days, title, y_label,
               width=900, height=420, margin=60) -> str:
    """Minimal deterministic SVG line plot, one polyline per day."""
    day_matrix = np.asarray(day_matrix, dtype=np.float64)
    n_days, n_slots = day_matrix.shape
    finite = day_matrix[np.isfinite(day_matrix)]
    y_min = float(finite.min()) if finite.size else 0.0
    y_max = float(finite.max()) if finite.size else 1.0
    if y_max == y_min:
        y_max = y_min + 1.0
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin

    def px(s):
        return margin + plot_w * s / max(n_slots - 1, 1)

    def py(v):
        return height - margin - plot_h * (v - y_min) / (y_max - y_min)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<text x="16" y="{height / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12" transform="rotate(-90 16 {height / 2:.1f})">{y_label}</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = y_min + frac * (y_max - y_min)
        y = py(v)
        parts.append(f'<text x="{margin - 6}" y="{y:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{v:.3g}</text>')
        s = frac * max(n_slots - 1, 1)
        parts.append(f'<text x="{px(s):.1f}" y="{height - margin + 16}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{int(round(s))}</text>')
    for d in range(n_days):
        pts = []
        for s in range(n_slots):
            v = day_matrix[d, s]
            if np.isfinite(v):
                pts.append(f"{px(s):.2f},{py(v):.2f}")
        color = _PALETTE[d % len(_PALETTE)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" '
                     f'points="{" ".join(pts)}"><title>{days[d]}</title></polyline>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (datetime.date, datetime.datetime)):
        return obj.isoformat()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")
