"""Constant-shift trace correction and nearest-road labeling.

A single global offset is estimated from a sample of records as the
iterated component-wise median of point-to-road displacement vectors,
then applied to every record before nearest-segment matching.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import OffsetCapError, OffsetEstimationError
from .ingest import IntervalIndex, TraceRecord, assign_interval
from .network import DEFAULT_MAX_DIST_KM, RoadNetwork

logger = logging.getLogger(__name__)

OFFSET_CAP_DEG = 0.01  # ~1.1 km; beyond this the data/network pairing is wrong
DEFAULT_MIN_SAMPLE = 1000

_MAX_ITER = 25
_CONVERGENCE_DEG = 1e-7


@dataclass(frozen=True)
class OffsetVector:
    """Constant coordinate correction, degrees."""

    dlat: float
    dlon: float

    def __post_init__(self):
        if abs(self.dlat) > OFFSET_CAP_DEG or abs(self.dlon) > OFFSET_CAP_DEG:
            raise OffsetCapError(
                f"offset ({self.dlat:+.5f}, {self.dlon:+.5f})° exceeds "
                f"±{OFFSET_CAP_DEG}° cap; check data/network pairing"
            )

    def negated(self) -> "OffsetVector":
        return OffsetVector(-self.dlat, -self.dlon)


@dataclass(frozen=True)
class MatchedPoint:
    """A corrected record labeled with its nearest road segment."""

    record: TraceRecord
    road_id: int
    match_dist_km: float
    interval: IntervalIndex


_MIN_GROUP_FRACTION = 0.05
_ZERO_DISPLACEMENT_DEG = 1e-9


def _median_step(lats, lons, net: RoadNetwork):
    """One correction step from point-to-road displacement vectors.

    Snapping a point to the nearest road only recovers the displacement
    component normal to that road (the along-road component is always 0),
    so each component's median is taken over the points whose displacement
    is dominated by that axis. Components without enough informative
    points step by 0.
    """
    n = len(lats)
    dlats = np.empty(n)
    dlons = np.empty(n)
    for i, (lat, lon) in enumerate(zip(lats, lons)):
        _, _, c_lat, c_lon = net.index.nearest(lat, lon, None)  # ungated
        dlats[i] = c_lat - lat
        dlons[i] = c_lon - lon
    a_lat = np.abs(dlats)
    a_lon = np.abs(dlons)
    eligible = np.maximum(a_lat, a_lon) > _ZERO_DISPLACEMENT_DEG
    vertical = eligible & (a_lat >= a_lon)
    horizontal = eligible & (a_lon > a_lat)
    min_count = max(20, int(_MIN_GROUP_FRACTION * n))
    step_lat = float(np.median(dlats[vertical])) if vertical.sum() >= min_count else 0.0
    step_lon = float(np.median(dlons[horizontal])) if horizontal.sum() >= min_count else 0.0
    return step_lat, step_lon


def estimate_offset(sample, net: RoadNetwork,
                    min_sample: int = DEFAULT_MIN_SAMPLE) -> OffsetVector:
    """Estimate the global correction offset from a record sample.

    Each iteration snaps the (partially corrected) sample to the nearest
    on-road points and accumulates the per-axis median displacement of the
    points informative for that axis; iteration stops once the step is
    negligible. Deterministic for a fixed sample.
    """
    if len(net.segments) == 0:
        raise OffsetEstimationError("network is empty")
    if len(sample) < min_sample:
        raise OffsetEstimationError(
            f"sample of {len(sample)} records is below minimum {min_sample}"
        )
    lats = np.array([r.lat for r in sample])
    lons = np.array([r.lon for r in sample])
    total_lat = 0.0
    total_lon = 0.0
    for _ in range(_MAX_ITER):
        step_lat, step_lon = _median_step(lats + total_lat, lons + total_lon, net)
        total_lat += step_lat
        total_lon += step_lon
        if abs(total_lat) > OFFSET_CAP_DEG or abs(total_lon) > OFFSET_CAP_DEG:
            raise OffsetCapError(
                f"offset estimate drifted to ({total_lat:+.5f}, {total_lon:+.5f})°, "
                f"beyond the ±{OFFSET_CAP_DEG}° cap"
            )
        if max(abs(step_lat), abs(step_lon)) < _CONVERGENCE_DEG:
            break
    logger.info("estimated offset (%+.6f, %+.6f)°", total_lat, total_lon)
    return OffsetVector(total_lat, total_lon)


def apply_offset(records, off: OffsetVector):
    """Translate a batch by the offset; returns (batch, skipped_count).

    Records pushed outside geographic range are skipped and counted.
    """
    out = []
    skipped = 0
    for r in records:
        lat = r.lat + off.dlat
        lon = r.lon + off.dlon
        if -90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0:
            out.append(TraceRecord(r.driver_id, r.order_id, r.timestamp, lat, lon))
        else:
            skipped += 1
    return out, skipped


def match_batch(records, net: RoadNetwork, max_dist_km: float = DEFAULT_MAX_DIST_KM,
                tz_offset_s: int = None):
    """Label each record with its nearest segment within the gate.

    Returns (matched, unmatched_count). Records with no segment within
    ``max_dist_km`` are counted as unmatched, a normal outcome.
    """
    from .ingest import DEFAULT_TZ_OFFSET_S

    if tz_offset_s is None:
        tz_offset_s = DEFAULT_TZ_OFFSET_S
    if not records:
        return [], 0
    lats = np.array([r.lat for r in records])
    lons = np.array([r.lon for r in records])
    seg_ids, dists = net.index.nearest_batch(lats, lons, max_dist_km)
    matched = []
    unmatched = 0
    for r, seg_id, dist in zip(records, seg_ids, dists):
        if seg_id < 0:
            unmatched += 1
            continue
        matched.append(MatchedPoint(r, int(seg_id), float(dist),
                                    assign_interval(r.timestamp, tz_offset_s)))
    if records:
        logger.debug("match rate %.1f%% (%d/%d)",
                     100.0 * len(matched) / len(records), len(matched), len(records))
    return matched, unmatched
