"""Road x interval tensor matrices: car-hailing flow and mean road speed.

Flow counts distinct order ids per road-interval cell; speed is the
arithmetic mean of trace-pair speeds, with a pair built from temporally
consecutive pings of one order on one road no more than 10 s apart.
Cleaning drops roads with too many empty cells, linearly interpolates the
remaining gaps, and repairs over-threshold anomalies from their temporal
neighbors.
"""

from __future__ import annotations

import datetime
import logging
from dataclasses import dataclass, field

import numpy as np

from . import geo
from .ingest import SLOTS_PER_DAY, IntervalIndex

logger = logging.getLogger(__name__)

DEFAULT_PAIR_DT_MAX_S = 10
DEFAULT_ANOMALY_KMH = 70.0
DEFAULT_MISSING_FRACTION = 0.2

_EPOCH = datetime.date(1970, 1, 1)


@dataclass(frozen=True)
class TracePair:
    """Two consecutive pings of one order on one road."""

    road_id: int
    d_km: float
    dt_s: float
    v_kmh: float


@dataclass
class SpatioTemporalMatrix:
    """Dense road x interval grid of flow counts or mean speeds (km/h)."""

    road_ids: list
    intervals: list  # IntervalIndex, ordered
    values: np.ndarray  # shape (len(road_ids), len(intervals))

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (len(self.road_ids), len(self.intervals)):
            raise ValueError("grid shape does not match axes")

    def row(self, road_id):
        return self.values[self.road_ids.index(road_id)]

    def interval_labels(self):
        return [iv.label() for iv in self.intervals]

    def days(self):
        seen = []
        for iv in self.intervals:
            if not seen or seen[-1] != iv.day:
                seen.append(iv.day)
        return seen

    def same_axes(self, other: "SpatioTemporalMatrix") -> bool:
        return self.road_ids == other.road_ids and self.intervals == other.intervals


def full_interval_axis(day_first: datetime.date, day_last: datetime.date):
    """All 96 slots for every day in the closed range."""
    out = []
    day = day_first
    while day <= day_last:
        out.extend(IntervalIndex(day, s) for s in range(SLOTS_PER_DAY))
        day += datetime.timedelta(days=1)
    return out


def build_pairs(points, pair_dt_max_s: float = DEFAULT_PAIR_DT_MAX_S):
    """Trace pairs from one order's matched points, sorted by timestamp.

    Consecutive points on the same road with 0 < dt <= pair_dt_max_s form
    a pair; cross-road pairs and duplicate timestamps are dropped.
    """
    pairs = []
    for p, q in zip(points, points[1:]):
        dt = q.record.timestamp - p.record.timestamp
        if p.road_id != q.road_id or dt <= 0 or dt > pair_dt_max_s:
            continue
        d = geo.haversine(p.record.lat, p.record.lon, q.record.lat, q.record.lon)
        pairs.append(TracePair(p.road_id, d, float(dt), d / (dt / 3600.0)))
    return pairs


def road_mean_speed(pairs):
    """Arithmetic mean of pair speeds; 0 when there are no pairs."""
    if not pairs:
        return 0.0
    return float(sum(p.v_kmh for p in pairs) / len(pairs))


def flow_count(points):
    """Number of distinct order ids among matched points."""
    return len({p.record.order_id for p in points})


class TensorBuilder:
    """Streaming accumulator for the flow and speed matrices.

    Batches may arrive in any chunking of the same source order; the
    result is bit-identical regardless (points are re-sorted per order at
    finalize, with a stable key, before pair construction).
    """

    def __init__(self, road_ids, pair_dt_max_s: float = DEFAULT_PAIR_DT_MAX_S):
        self.road_ids = sorted(road_ids)
        self.pair_dt_max_s = pair_dt_max_s
        self._road_pos = {rid: i for i, rid in enumerate(self.road_ids)}
        self._order_idx: dict[str, int] = {}
        self._chunks: list[tuple] = []
        self.n_points = 0

    def add(self, matched):
        """Append a batch of MatchedPoints."""
        if not matched:
            return
        n = len(matched)
        order = np.empty(n, dtype=np.int64)
        ts = np.empty(n, dtype=np.int64)
        road = np.empty(n, dtype=np.int64)
        day = np.empty(n, dtype=np.int64)
        slot = np.empty(n, dtype=np.int64)
        lat = np.empty(n)
        lon = np.empty(n)
        oidx = self._order_idx
        for i, mp in enumerate(matched):
            rec = mp.record
            order[i] = oidx.setdefault(rec.order_id, len(oidx))
            ts[i] = rec.timestamp
            road[i] = self._road_pos[mp.road_id]
            day[i] = mp.interval.day.toordinal()
            slot[i] = mp.interval.slot
            lat[i] = rec.lat
            lon[i] = rec.lon
        self._chunks.append((order, ts, road, day, slot, lat, lon))
        self.n_points += n

    def finalize(self):
        """Build (flow, speed) matrices over the full road x interval grid."""
        if not self._chunks:
            axis = []
            empty = np.zeros((len(self.road_ids), 0))
            return (SpatioTemporalMatrix(self.road_ids, axis, empty.copy()),
                    SpatioTemporalMatrix(self.road_ids, axis, empty.copy()))
        order, ts, road, day, slot, lat, lon = (
            np.concatenate([c[i] for c in self._chunks]) for i in range(7)
        )

        day0 = int(day.min())
        day1 = int(day.max())
        n_days = day1 - day0 + 1
        n_cols = n_days * SLOTS_PER_DAY
        n_rows = len(self.road_ids)
        col = (day - day0) * SLOTS_PER_DAY + slot
        cell = road * n_cols + col

        # flow: distinct orders per cell
        flow = np.zeros(n_rows * n_cols, dtype=np.int64)
        uniq_cells = np.unique(np.stack([cell, order], axis=1), axis=0)[:, 0]
        cells, counts = np.unique(uniq_cells, return_counts=True)
        flow[cells] = counts

        # speed: mean over consecutive same-order same-road pairs
        sort = np.lexsort((np.arange(order.size), ts, order))
        o_s, ts_s, road_s = order[sort], ts[sort], road[sort]
        cell_s, lat_s, lon_s = cell[sort], lat[sort], lon[sort]
        dt = ts_s[1:] - ts_s[:-1]
        ok = (o_s[1:] == o_s[:-1]) & (road_s[1:] == road_s[:-1]) \
            & (dt > 0) & (dt <= self.pair_dt_max_s)
        d = geo.haversine(lat_s[:-1][ok], lon_s[:-1][ok], lat_s[1:][ok], lon_s[1:][ok])
        v = np.asarray(d) / (dt[ok] / 3600.0)
        pair_cell = cell_s[:-1][ok]  # pair belongs to the earlier point's slot

        v_sum = np.zeros(n_rows * n_cols)
        v_cnt = np.zeros(n_rows * n_cols, dtype=np.int64)
        np.add.at(v_sum, pair_cell, v)
        np.add.at(v_cnt, pair_cell, 1)
        with np.errstate(invalid="ignore"):
            speed = np.where(v_cnt > 0, v_sum / np.maximum(v_cnt, 1), 0.0)

        axis = full_interval_axis(datetime.date.fromordinal(day0),
                                  datetime.date.fromordinal(day1))
        return (SpatioTemporalMatrix(self.road_ids, axis, flow.reshape(n_rows, n_cols)),
                SpatioTemporalMatrix(self.road_ids, axis, speed.reshape(n_rows, n_cols)))


def build_tensors(matched_batches, road_ids,
                  pair_dt_max_s: float = DEFAULT_PAIR_DT_MAX_S):
    """(FlowMatrix, SpeedMatrix) from an iterable of MatchedPoint batches."""
    builder = TensorBuilder(road_ids, pair_dt_max_s)
    for batch in matched_batches:
        builder.add(batch)
    return builder.finalize()


def filter_missing(speeds: SpatioTemporalMatrix,
                   max_missing_fraction: float = DEFAULT_MISSING_FRACTION):
    """Drop roads whose fraction of zero cells exceeds the threshold.

    A zero cell means no GPS trace in that interval. Returns
    (retained SpeedMatrix, dropped road ids); the interval axis is kept.
    """
    if not 0.0 <= max_missing_fraction <= 1.0:
        raise ValueError("max_missing_fraction must be in [0, 1]")
    n_cols = speeds.values.shape[1]
    if n_cols == 0:
        return speeds, []
    missing = (speeds.values == 0.0).sum(axis=1) / n_cols
    keep = missing <= max_missing_fraction
    dropped = [rid for rid, k in zip(speeds.road_ids, keep) if not k]
    retained = SpatioTemporalMatrix(
        [rid for rid, k in zip(speeds.road_ids, keep) if k],
        speeds.intervals,
        speeds.values[keep],
    )
    if not retained.road_ids:
        logger.warning("all %d roads dropped by missing-value filter", len(dropped))
    return retained, dropped


def interpolate_missing(row):
    """Fill zero runs in one road's interval series by linear interpolation.

    Leading/trailing zeros take the nearest non-zero value. An all-zero
    row is returned unchanged (the caller flags it).
    """
    row = np.asarray(row, dtype=np.float64)
    good = np.nonzero(row != 0.0)[0]
    if good.size == 0 or good.size == row.size:
        return row.copy()
    x = np.arange(row.size)
    return np.interp(x, good, row[good])


def repair_anomalies(row, threshold_kmh: float = DEFAULT_ANOMALY_KMH):
    """Replace over-threshold values by the mean of their nearest
    non-anomalous temporal neighbors (one per side, single at edges).

    Returns (repaired series, anomaly_count). An all-anomalous row is
    clamped to the threshold.
    """
    row = np.asarray(row, dtype=np.float64)
    bad = row > threshold_kmh
    count = int(bad.sum())
    if count == 0:
        return row.copy(), 0
    good = np.nonzero(~bad)[0]
    out = row.copy()
    if good.size == 0:
        logger.warning("entire series anomalous, clamping to %.0f km/h", threshold_kmh)
        out[:] = threshold_kmh
        return out, count
    bad_idx = np.nonzero(bad)[0]
    pos = np.searchsorted(good, bad_idx)
    left = np.where(pos > 0, good[np.maximum(pos - 1, 0)], -1)
    right = np.where(pos < good.size, good[np.minimum(pos, good.size - 1)], -1)
    left_v = np.where(left >= 0, row[left], 0.0)
    right_v = np.where(right >= 0, row[right], 0.0)
    n_sides = (left >= 0).astype(float) + (right >= 0).astype(float)
    out[bad_idx] = (left_v + right_v) / n_sides
    return out, count


@dataclass
class CleaningReport:
    """Outcome of the full speed-matrix cleaning pass."""

    speeds: SpatioTemporalMatrix
    dropped_road_ids: list
    flagged_road_ids: list  # all-zero rows that survived the filter
    anomaly_count: int
    anomaly_rate: float
    missing_fraction_threshold: float = DEFAULT_MISSING_FRACTION
    anomaly_threshold_kmh: float = DEFAULT_ANOMALY_KMH


def clean_speed_matrix(speeds: SpatioTemporalMatrix,
                       max_missing_fraction: float = DEFAULT_MISSING_FRACTION,
                       anomaly_kmh: float = DEFAULT_ANOMALY_KMH) -> CleaningReport:
    """Missing-value filter, then interpolation, then anomaly repair."""
    retained, dropped = filter_missing(speeds, max_missing_fraction)
    values = retained.values.copy()
    flagged = []
    anomalies = 0
    for i, rid in enumerate(retained.road_ids):
        row = values[i]
        if not np.any(row != 0.0):
            flagged.append(rid)
            continue
        row = interpolate_missing(row)
        row, n = repair_anomalies(row, anomaly_kmh)
        anomalies += n
        values[i] = row
    total = values.size
    report = CleaningReport(
        SpatioTemporalMatrix(retained.road_ids, retained.intervals, values),
        dropped, flagged, anomalies,
        anomalies / total if total else 0.0,
        max_missing_fraction, anomaly_kmh,
    )
    logger.info("cleaning: %d roads dropped, %d anomalies (%.3f%%)",
                len(dropped), anomalies, 100.0 * report.anomaly_rate)
    return report
