"""End-to-end orchestration: ingest, correct, match, aggregate, analyze,
export. Produces a manifest recording configuration, counts, and output
digests; reruns on identical inputs are byte-identical.
"""

from __future__ import annotations

import datetime
import logging
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from . import congestion as cg
from . import export as ex
from . import matching, network, patterns
from .errors import ConfigError
from .ingest import (DEFAULT_CHUNK_SIZE, DEFAULT_ERROR_RATE_CEILING,
                     DEFAULT_TZ_OFFSET_S, IngestStats, ParserConfig,
                     read_chunks_from_path)

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    traces_path: str
    network_path: str
    out_dir: str
    tz_offset_s: int = DEFAULT_TZ_OFFSET_S
    chunk_size: int = DEFAULT_CHUNK_SIZE
    max_dist_km: float = network.DEFAULT_MAX_DIST_KM
    pair_dt_max_s: float = patterns.DEFAULT_PAIR_DT_MAX_S
    anomaly_kmh: float = patterns.DEFAULT_ANOMALY_KMH
    missing_fraction: float = patterns.DEFAULT_MISSING_FRACTION
    error_rate_ceiling: float = DEFAULT_ERROR_RATE_CEILING
    offset: tuple | None = None  # (dlat, dlon); None = estimate
    offset_sample_size: int = matching.DEFAULT_MIN_SAMPLE
    date_groups: dict = field(default_factory=dict)  # scenario -> [iso dates]

    def validate(self):
        for name in ("chunk_size", "max_dist_km", "pair_dt_max_s",
                     "anomaly_kmh", "error_rate_ceiling"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.missing_fraction <= 1.0:
            raise ConfigError("missing_fraction must be in [0, 1]")
        seen = {}
        for group, dates in self.date_groups.items():
            for d in dates:
                if d in seen:
                    raise ConfigError(f"date {d} in both {seen[d]!r} and {group!r}")
                seen[d] = group
        if not os.path.exists(self.traces_path):
            raise ConfigError(f"traces file not found: {self.traces_path}")
        if not os.path.exists(self.network_path):
            raise ConfigError(f"network file not found: {self.network_path}")


def resolve_offset(config: RunConfig, net, chunks_iter):
    """Explicit offset, or estimate from the head of the record stream.

    Returns (offset, buffered_chunks): chunks consumed for the sample are
    handed back so the caller still processes every record.
    """
    if config.offset is not None:
        return matching.OffsetVector(*config.offset), []
    buffered = []
    sample = []
    for chunk in chunks_iter:
        buffered.append(chunk)
        sample.extend(chunk)
        if len(sample) >= config.offset_sample_size:
            break
    off = matching.estimate_offset(sample[:config.offset_sample_size], net,
                                   min_sample=config.offset_sample_size)
    return off, buffered


def run_pipeline(config: RunConfig) -> dict:
    """Execute the full pipeline and write all artifacts to ``out_dir``.

    Returns the manifest (also written as ``manifest.json``).
    """
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)
    stage = "load_network"
    manifest = {"config": _config_echo(config), "stages_completed": []}
    try:
        net = network.load_network(config.network_path)
        manifest["stages_completed"].append(stage)

        stage = "ingest_and_match"
        parser = ParserConfig(tz_offset_s=config.tz_offset_s,
                              chunk_size=config.chunk_size,
                              error_rate_ceiling=config.error_rate_ceiling)
        stats = IngestStats()
        chunks = read_chunks_from_path(config.traces_path, parser, stats)
        offset, buffered = resolve_offset(config, net, chunks)

        builder = patterns.TensorBuilder(net.ordered_ids(), config.pair_dt_max_s)
        matched_n = unmatched_n = offset_skipped = 0

        def process(chunk):
            nonlocal matched_n, unmatched_n, offset_skipped
            shifted, skipped = matching.apply_offset(chunk, offset)
            offset_skipped += skipped
            matched, unmatched = matching.match_batch(
                shifted, net, config.max_dist_km, config.tz_offset_s)
            matched_n += len(matched)
            unmatched_n += unmatched
            builder.add(matched)

        for chunk in buffered:
            process(chunk)
        for chunk in chunks:
            process(chunk)
        manifest["stages_completed"].append(stage)

        stage = "build_tensors"
        flow, speed_raw = builder.finalize()
        manifest["stages_completed"].append(stage)

        stage = "clean"
        cleaning = patterns.clean_speed_matrix(speed_raw, config.missing_fraction,
                                               config.anomaly_kmh)
        manifest["stages_completed"].append(stage)

        stage = "analyze"
        analysis = analyze(flow, cleaning.speeds, net, config)
        manifest["stages_completed"].append(stage)

        stage = "export"
        meta = {
            "interval_seconds": 900,
            "tz_offset_s": config.tz_offset_s,
            "anomaly_threshold_kmh": config.anomaly_kmh,
            "missing_fraction_threshold": config.missing_fraction,
            "dropped_road_ids": cleaning.dropped_road_ids,
            "anomaly_rate": cleaning.anomaly_rate,
        }
        outputs = {
            "flow.csv": lambda p: ex.write_matrix_csv(flow, p, meta),
            "speed_raw.csv": lambda p: ex.write_matrix_csv(speed_raw, p, meta),
            "speed_clean.csv": lambda p: ex.write_matrix_csv(cleaning.speeds, p, meta),
            "inrix.csv": lambda p: ex.write_matrix_csv(analysis["scores"].per_road, p, meta),
            "network_series.csv": lambda p: _write_network_series(
                analysis["scores"], flow, p),
            "daily.csv": lambda p: _write_daily(analysis["daily"], p),
            "fitting.json": lambda p: ex.write_json(analysis["fitting"], p),
        }
        digests = {}
        for name, write in outputs.items():
            path = os.path.join(config.out_dir, name)
            write(path)
            digests[name] = ex.sha256_file(path)
        manifest["stages_completed"].append(stage)

        manifest.update({
            "offset": {"dlat": offset.dlat, "dlon": offset.dlon,
                       "source": "explicit" if config.offset is not None else "estimated"},
            "counts": {
                "rows_total": stats.total,
                "parsed": stats.parsed,
                "skipped_rows": stats.skipped,
                "offset_skipped": offset_skipped,
                "matched": matched_n,
                "unmatched": unmatched_n,
            },
            "dropped_road_ids": cleaning.dropped_road_ids,
            "flagged_road_ids": cleaning.flagged_road_ids,
            "anomaly_count": cleaning.anomaly_count,
            "anomaly_rate": cleaning.anomaly_rate,
            "digests": digests,
        })
    except Exception as exc:
        manifest["failed_stage"] = stage
        manifest["error"] = str(exc)
        ex.write_json(manifest, os.path.join(config.out_dir, "manifest.json"))
        raise
    ex.write_json(manifest, os.path.join(config.out_dir, "manifest.json"))
    return manifest


def analyze(flow, cleaned_speeds, net, config: RunConfig) -> dict:
    """Congestion scores, daily aggregates, and per-scenario fitting
    indices (raw and after per-day min-max normalization)."""
    scores = cg.score_matrix(cleaned_speeds, net, config.anomaly_kmh)
    daily = cg.daily_aggregates(flow, scores)
    fitting = {}
    try:
        days, dc = cg.network_day_matrix(scores)
        _, cf = cg.flow_day_matrix(flow)
    except ValueError:
        return {"scores": scores, "daily": daily, "fitting": fitting}
    groups = _resolve_groups(config.date_groups, days)
    for group, member_days in sorted(groups.items()):
        rows = [i for i, d in enumerate(days) if d in member_days]
        if len(rows) < 2:
            continue
        entry = {}
        for label, mat in (("dc", dc[rows]), ("cf", cf[rows])):
            if np.isnan(mat).any():
                continue
            fit = cg.fitting_index(mat)
            norm = np.stack([cg.min_max_normalize(r)[0] for r in mat])
            fit_n = cg.fitting_index(norm)
            entry[label] = {"f2": fit.value, "degenerate": fit.degenerate,
                            "f2_normalized": fit_n.value,
                            "degenerate_normalized": fit_n.degenerate}
        if entry:
            entry["days"] = sorted(d.isoformat() for d in member_days)
            fitting[group] = entry
    return {"scores": scores, "daily": daily, "fitting": fitting}


def _resolve_groups(date_groups, days):
    if date_groups:
        wanted = {g: {datetime.date.fromisoformat(d) for d in ds}
                  for g, ds in date_groups.items()}
        return {g: {d for d in days if d in ds} for g, ds in wanted.items()}
    # no explicit grouping: weekday vs weekend from the calendar
    return {"weekday": {d for d in days if d.weekday() < 5},
            "weekend": {d for d in days if d.weekday() >= 5}}


def _write_network_series(scores, flow, path):
    import csv

    labels = flow.interval_labels()
    cf = flow.values.sum(axis=0)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["interval", "network_inrix", "cf_total"])
        for lbl, dc, f in zip(labels, scores.network, cf):
            w.writerow([lbl, "" if np.isnan(dc) else repr(float(dc)), int(f)])


def _write_daily(daily, path):
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["day", "cf_total", "dc_mean", "partial"])
        for agg in daily:
            dc = "" if np.isnan(agg.dc_mean) else repr(agg.dc_mean)
            w.writerow([agg.day.isoformat(), agg.cf_total, dc, int(agg.partial)])


def _config_echo(config: RunConfig) -> dict:
    echo = asdict(config)
    echo["offset"] = list(config.offset) if config.offset is not None else None
    return echo
