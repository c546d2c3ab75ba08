import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracepattern import geo
from tracepattern.ingest import IntervalIndex, TraceRecord
from tracepattern.matching import MatchedPoint, match_batch
from tracepattern.network import load_network
from tracepattern.patterns import (SpatioTemporalMatrix, TensorBuilder,
                                   build_pairs, clean_speed_matrix,
                                   filter_missing, flow_count,
                                   full_interval_axis, interpolate_missing,
                                   repair_anomalies, road_mean_speed)
from tracepattern.synth import Scenario, generate, uniform_profile

from conftest import parse_all

DAY = datetime.date(2016, 10, 1)


def mp(road, ts, lat, lon, order="o1", slot=None):
    return MatchedPoint(TraceRecord("d1", order, ts, lat, lon), road, 0.0,
                        IntervalIndex(DAY, slot if slot is not None else (ts % 86400) // 900))


class TestHaversine:
    def test_identity(self):
        assert geo.haversine(30.65, 104.06, 30.65, 104.06) == 0.0

    def test_quarter_great_circle(self):
        # pole to equator with r = 6378.137: pi * r / 2
        assert geo.haversine(90, 0, 0, 0) == pytest.approx(10018.754, abs=1e-3)

    def test_meridian_small_arc(self):
        assert geo.haversine(30.65, 104.06, 30.66, 104.06) == \
            pytest.approx(1.1132, abs=5e-4)

    def test_symmetry(self):
        assert geo.haversine(30.1, 104.2, 31.3, 105.4) == \
            geo.haversine(31.3, 105.4, 30.1, 104.2)

    def test_high_precision_oracle(self):
        import mpmath as mp_

        mp_.mp.dps = 50
        rng = np.random.default_rng(42)
        for _ in range(1000):
            lat1, lat2 = rng.uniform(-85, 85, 2)
            lon1, lon2 = rng.uniform(-180, 180, 2)
            got = geo.haversine(lat1, lon1, lat2, lon2)
            p1, p2 = mp_.mpf(lat1) * mp_.pi / 180, mp_.mpf(lat2) * mp_.pi / 180
            dl = (mp_.mpf(lon2) - mp_.mpf(lon1)) * mp_.pi / 180
            num = mp_.sqrt((mp_.cos(p2) * mp_.sin(dl)) ** 2 +
                           (mp_.cos(p1) * mp_.sin(p2) -
                            mp_.sin(p1) * mp_.cos(p2) * mp_.cos(dl)) ** 2)
            den = mp_.sin(p1) * mp_.sin(p2) + mp_.cos(p1) * mp_.cos(p2) * mp_.cos(dl)
            expected = float(mp_.mpf("6378.137") * mp_.atan2(num, den))
            assert got == pytest.approx(expected, rel=1e-6, abs=1e-9)


class TestBuildPairs:
    def test_pair_speed(self):
        # ~50 m apart, 5 s apart -> 36 km/h
        a = mp(1, 1000, 30.65, 104.06)
        b = mp(1, 1005, 30.65 + 0.05 / geo.KM_PER_DEG, 104.06)
        pairs = build_pairs([a, b])
        assert len(pairs) == 1
        assert pairs[0].v_kmh == pytest.approx(36.0, rel=1e-6)
        assert pairs[0].dt_s == 5.0

    def test_gap_above_threshold_dropped(self):
        a = mp(1, 1000, 30.65, 104.06)
        b = mp(1, 1015, 30.651, 104.06)
        assert build_pairs([a, b]) == []

    def test_boundary_inclusive(self):
        a = mp(1, 1000, 30.65, 104.06)
        b = mp(1, 1010, 30.651, 104.06)
        assert len(build_pairs([a, b])) == 1

    def test_duplicate_timestamp_dropped(self):
        a = mp(1, 1000, 30.65, 104.06)
        b = mp(1, 1000, 30.651, 104.06)
        assert build_pairs([a, b]) == []

    def test_cross_road_dropped(self):
        a = mp(1, 1000, 30.65, 104.06)
        b = mp(2, 1003, 30.651, 104.06)
        assert build_pairs([a, b]) == []


class TestRoadMeanSpeed:
    def test_mean(self):
        a = mp(1, 1000, 30.65, 104.06)
        b = mp(1, 1005, 30.65 + 0.05 / geo.KM_PER_DEG, 104.06)
        c = mp(1, 1010, 30.65 + 0.15 / geo.KM_PER_DEG, 104.06)
        pairs = build_pairs([a, b, c])  # 36 and 72 km/h
        assert road_mean_speed(pairs) == pytest.approx(54.0, rel=1e-6)

    def test_empty_is_zero(self):
        assert road_mean_speed([]) == 0.0

    def test_single_pair(self):
        a = mp(1, 1000, 30.65, 104.06)
        b = mp(1, 1005, 30.65 + 0.05 / geo.KM_PER_DEG, 104.06)
        assert road_mean_speed(build_pairs([a, b])) == pytest.approx(36.0, rel=1e-6)


class TestFlowCount:
    def test_distinct_orders(self):
        pts = [mp(1, 1000 + i, 30.65, 104.06, order=o)
               for i, o in enumerate(["o1", "o1", "o2", "o3", "o3"])]
        assert flow_count(pts) == 3

    def test_empty(self):
        assert flow_count([]) == 0

    def test_matches_hash_set_oracle(self):
        rng = np.random.default_rng(3)
        orders = [f"o{rng.integers(0, 500)}" for _ in range(10_000)]
        pts = [mp(1, 1000 + i, 30.65, 104.06, order=o) for i, o in enumerate(orders)]
        assert flow_count(pts) == len(set(orders))


class TestTensorBuilder:
    def test_single_pair_cell(self):
        a = mp(3, 32 * 900 + 10, 30.65, 104.06)
        b = mp(3, 32 * 900 + 15, 30.65 + 0.05 / geo.KM_PER_DEG, 104.06)
        builder = TensorBuilder(road_ids=[0, 3, 5])
        builder.add([a, b])
        flow, speed = builder.finalize()
        r = flow.road_ids.index(3)
        assert flow.values[r, 32] == 1
        assert speed.values[r, 32] == pytest.approx(36.0, rel=1e-6)
        assert flow.values.sum() == 1  # one order, one cell

    def test_empty_stream(self):
        flow, speed = TensorBuilder([1, 2]).finalize()
        assert flow.values.size == 0 and speed.values.size == 0

    def test_chunk_invariance_on_synthetic(self, small_generated, small_net,
                                           small_records):
        matched, _ = match_batch(small_records, small_net)
        results = []
        for chunk_size in (1, 7, 10_000, len(matched)):
            builder = TensorBuilder(small_net.ordered_ids())
            for i in range(0, len(matched), chunk_size):
                builder.add(matched[i:i + chunk_size])
            results.append(builder.finalize())
        flow0, speed0 = results[0]
        for flow, speed in results[1:]:
            assert np.array_equal(flow.values, flow0.values)
            assert np.array_equal(speed.values, speed0.values)
            assert flow.intervals == flow0.intervals

    def test_flow_bounded_by_point_count(self, small_net, small_records):
        matched, _ = match_batch(small_records, small_net)
        builder = TensorBuilder(small_net.ordered_ids())
        builder.add(matched)
        flow, _ = builder.finalize()
        raw = np.zeros_like(flow.values)
        col_of = {iv: j for j, iv in enumerate(flow.intervals)}
        row_of = {rid: i for i, rid in enumerate(flow.road_ids)}
        for m in matched:
            raw[row_of[m.road_id], col_of[m.interval]] += 1
        assert np.all(flow.values <= raw)

    def test_matches_in_memory_oracle(self, small_net, small_records):
        """Grouped per-order recomputation, no chunking, pure dict/loops."""
        matched, _ = match_batch(small_records, small_net)
        builder = TensorBuilder(small_net.ordered_ids())
        builder.add(matched)
        flow, speed = builder.finalize()

        by_order = {}
        for m in matched:
            by_order.setdefault(m.record.order_id, []).append(m)
        col_of = {iv: j for j, iv in enumerate(flow.intervals)}
        row_of = {rid: i for i, rid in enumerate(flow.road_ids)}
        flow_sets = {}
        v_acc = {}
        for order, pts in by_order.items():
            pts.sort(key=lambda m: m.record.timestamp)
            for m in pts:
                flow_sets.setdefault((m.road_id, m.interval), set()).add(order)
            for a, b in zip(pts, pts[1:]):
                dt = b.record.timestamp - a.record.timestamp
                if a.road_id != b.road_id or dt <= 0 or dt > 10:
                    continue
                d = geo.haversine(a.record.lat, a.record.lon, b.record.lat, b.record.lon)
                v_acc.setdefault((a.road_id, a.interval), []).append(d / (dt / 3600.0))
        exp_flow = np.zeros_like(flow.values)
        for (rid, iv), orders in flow_sets.items():
            exp_flow[row_of[rid], col_of[iv]] = len(orders)
        exp_speed = np.zeros_like(speed.values)
        for (rid, iv), vs in v_acc.items():
            exp_speed[row_of[rid], col_of[iv]] = np.mean(vs)
        assert np.array_equal(flow.values, exp_flow)
        np.testing.assert_allclose(speed.values, exp_speed, rtol=1e-12, atol=1e-12)


class TestFilterMissing:
    def axis(self):
        return full_interval_axis(DAY, DAY)

    def matrix(self, rows):
        return SpatioTemporalMatrix(list(range(len(rows))), self.axis(),
                                    np.asarray(rows, dtype=float))

    def test_above_threshold_dropped(self):
        row = np.full(96, 30.0)
        row[:30] = 0.0  # 31% missing
        retained, dropped = filter_missing(self.matrix([row]), 0.2)
        assert dropped == [0] and retained.road_ids == []

    def test_below_threshold_retained(self):
        row = np.full(96, 30.0)
        row[:10] = 0.0  # 10.4%
        retained, dropped = filter_missing(self.matrix([row]), 0.2)
        assert dropped == [] and retained.road_ids == [0]
        assert len(retained.intervals) == 96

    def test_vacuous_threshold(self):
        retained, dropped = filter_missing(self.matrix([np.zeros(96)]), 1.0)
        assert dropped == []

    def test_matches_brute_force_fraction(self):
        rng = np.random.default_rng(5)
        rows = np.where(rng.random((40, 96)) < 0.25, 0.0, 30.0)
        retained, dropped = filter_missing(self.matrix(rows), 0.2)
        for i, row in enumerate(rows):
            frac = sum(1 for v in row if v == 0) / 96
            assert (i in dropped) == (frac > 0.2)


class TestInterpolateMissing:
    def test_linear_fill(self):
        np.testing.assert_allclose(interpolate_missing([20, 0, 0, 32]), [20, 24, 28, 32])

    def test_edge_extension(self):
        np.testing.assert_allclose(interpolate_missing([0, 0, 30, 30]), [30, 30, 30, 30])

    def test_no_zeros_unchanged(self):
        row = [25.0, 30.0, 35.0]
        np.testing.assert_array_equal(interpolate_missing(row), row)

    def test_all_zero_untouched(self):
        np.testing.assert_array_equal(interpolate_missing([0.0, 0.0]), [0.0, 0.0])

    @given(st.lists(st.sampled_from([0.0, 10.0, 20.0, 30.0]), min_size=2, max_size=96))
    @settings(max_examples=50, deadline=None)
    def test_no_zeros_remain(self, row):
        filled = interpolate_missing(row)
        if any(v != 0 for v in row):
            assert np.all(filled != 0.0) or min(v for v in row if v != 0) > 0 and np.all(filled > 0)


class TestRepairAnomalies:
    def test_neighbor_mean(self):
        repaired, n = repair_anomalies([40, 200, 44], 70)
        np.testing.assert_allclose(repaired, [40, 42, 44])
        assert n == 1

    def test_edge_single_neighbor(self):
        repaired, n = repair_anomalies([200, 40, 44], 70)
        np.testing.assert_allclose(repaired, [40, 40, 44])
        assert n == 1

    def test_no_anomalies(self):
        repaired, n = repair_anomalies([40, 50, 60], 70)
        np.testing.assert_allclose(repaired, [40, 50, 60])
        assert n == 0

    def test_all_anomalous_clamped(self):
        repaired, n = repair_anomalies([100, 200], 70)
        np.testing.assert_allclose(repaired, [70, 70])
        assert n == 2

    def test_consecutive_anomalies_no_cascade(self):
        repaired, n = repair_anomalies([40, 200, 300, 60], 70)
        np.testing.assert_allclose(repaired, [40, 50, 50, 60])
        assert n == 2


class TestCleanSpeedMatrix:
    def test_post_conditions(self):
        rng = np.random.default_rng(8)
        rows = rng.uniform(10, 60, (30, 96))
        rows[rng.random(rows.shape) < 0.1] = 0.0
        rows[0, :40] = 0.0  # force a drop
        rows[5, 17] = 120.0  # anomaly
        axis = full_interval_axis(DAY, DAY)
        matrix = SpatioTemporalMatrix(list(range(30)), axis, rows)
        report = clean_speed_matrix(matrix, 0.2, 70.0)
        assert 0 in report.dropped_road_ids
        assert report.anomaly_count >= 1
        values = report.speeds.values
        assert np.all(values > 0.0)
        assert np.all(values <= 70.0)
