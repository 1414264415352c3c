import json
from datetime import timedelta

import pytest

from smstrack.codec import MessageKind, TrackerMessage, parse_tracker_response
from smstrack.errors import UnknownDevice

from conftest import T0


def fix_message(lat=5.41, lon=118.037, speed=12.0, bat=85, stale=False):
    return TrackerMessage(
        kind=MessageKind.LAST_KNOWN_FIX if stale else MessageKind.FIX,
        latitude=lat, longitude=lon, speed_kmh=speed, battery_percent=bat,
        imei="359710049887766",
        maps_url=f"http://maps.google.com/maps?q={lat:.6f},{lon:.6f}")


class TestIngest:
    def test_fix_stored_fresh(self, harness):
        device = harness.add_device()
        pos = harness.pipeline.ingest(device.device_id, fix_message(), T0, "msg-1")
        assert pos.fix_quality == "fresh"
        assert pos.battery_percent == 85
        assert pos.latitude == pytest.approx(5.41)

    def test_stale_repeats_flagged(self, harness):
        device = harness.add_device()
        first = harness.pipeline.ingest(device.device_id, fix_message(stale=True),
                                        T0, "msg-1")
        second = harness.pipeline.ingest(device.device_id, fix_message(stale=True),
                                         T0 + timedelta(minutes=1), "msg-2")
        assert first.fix_quality == "stale" and not first.is_repeat
        assert second.fix_quality == "stale" and second.is_repeat
        assert harness.store.count("positions") == 2

    def test_unrecognized_not_stored(self, harness):
        device = harness.add_device()
        msg = parse_tracker_response("garbage")
        assert harness.pipeline.ingest(device.device_id, msg, T0, "msg-1") is None
        assert harness.store.count("positions") == 0

    def test_incomplete_with_salvage_stored_as_salvaged(self, harness):
        device = harness.add_device()
        msg = parse_tracker_response("http://maps.google.com/maps?q=5.410000,118.037000")
        pos = harness.pipeline.ingest(device.device_id, msg, T0, "msg-1")
        assert pos.fix_quality == "salvaged"

    def test_incomplete_without_coords_not_stored(self, harness):
        device = harness.add_device()
        msg = parse_tracker_response("http://maps.google.com/maps?q=truncated")
        assert harness.pipeline.ingest(device.device_id, msg, T0, "msg-1") is None

    def test_idempotent_on_source_message_id(self, harness):
        device = harness.add_device()
        first = harness.pipeline.ingest(device.device_id, fix_message(), T0, "msg-1")
        again = harness.pipeline.ingest(device.device_id, fix_message(lat=9.0),
                                        T0 + timedelta(hours=1), "msg-1")
        assert again.position_id == first.position_id
        assert again.latitude == first.latitude
        assert harness.store.count("positions") == 1

    def test_unknown_device_raises(self, harness):
        with pytest.raises(UnknownDevice):
            harness.pipeline.ingest("dev-404", fix_message(), T0, "msg-1")

    def test_equal_server_times_forced_strictly_increasing(self, harness):
        device = harness.add_device()
        a = harness.pipeline.ingest(device.device_id, fix_message(), T0, "msg-1")
        b = harness.pipeline.ingest(device.device_id, fix_message(lat=6.0), T0, "msg-2")
        assert b.server_time > a.server_time


class TestQueryTrack:
    def seed(self, harness, n=3):
        device = harness.add_device()
        positions = []
        for i in range(n):
            positions.append(harness.pipeline.ingest(
                device.device_id, fix_message(lat=5.0 + i * 0.01),
                T0 + timedelta(minutes=i), f"msg-{i}"))
        return device, positions

    def test_empty_range(self, harness):
        device, _ = self.seed(harness)
        rows = harness.pipeline.query_track(
            device.device_id, T0 + timedelta(days=1), T0 + timedelta(days=2))
        assert rows == []

    def test_window_covers_subset_in_order(self, harness):
        device, _ = self.seed(harness, n=3)
        rows = harness.pipeline.query_track(
            device.device_id, T0 + timedelta(minutes=1), T0 + timedelta(minutes=2))
        assert [p.latitude for p in rows] == [pytest.approx(5.01), pytest.approx(5.02)]

    def test_pagination_no_gaps_no_duplicates(self, harness):
        device, positions = self.seed(harness, n=3)
        seen = []
        cursor = None
        pages = 0
        while True:
            page = harness.pipeline.query_track(
                device.device_id, T0, T0 + timedelta(hours=1), cursor=cursor, limit=1)
            if not page:
                break
            pages += 1
            seen.extend(p.position_id for p in page)
            last = page[-1]
            cursor = (harness.store.last_position(device.device_id) and
                      (last.to_record()["server_time"], last.position_id))
        assert pages == 3
        assert seen == [p.position_id for p in positions]

    def test_inverted_range_rejected(self, harness):
        device, _ = self.seed(harness)
        with pytest.raises(Exception):
            harness.pipeline.query_track(device.device_id, T0 + timedelta(hours=1), T0)

    def test_every_position_traceable_to_logged_message(self, harness):
        device, positions = self.seed(harness, n=3)
        for pos in positions:
            assert pos.source_message_id


class TestExport:
    def test_csv_columns(self, harness):
        device = harness.add_device()
        harness.pipeline.ingest(device.device_id, fix_message(), T0, "m1")
        doc = harness.pipeline.export_track(device.device_id, T0,
                                            T0 + timedelta(hours=1), "csv")
        lines = doc.strip().splitlines()
        assert lines[0] == "server_time,latitude,longitude,speed,battery_percent,fix_quality"
        assert "5.410000" in lines[1]
        assert lines[1].endswith("fresh")

    def test_geojson_linestring_of_two_fresh_fixes(self, harness):
        device = harness.add_device()
        harness.pipeline.ingest(device.device_id, fix_message(lat=5.0), T0, "m1")
        harness.pipeline.ingest(device.device_id, fix_message(lat=5.01),
                                T0 + timedelta(minutes=1), "m2")
        doc = json.loads(harness.pipeline.export_track(
            device.device_id, T0, T0 + timedelta(hours=1), "geojson"))
        lines = [f for f in doc["features"] if f["geometry"]["type"] == "LineString"]
        assert len(lines) == 1
        assert len(lines[0]["geometry"]["coordinates"]) == 2

    def test_geojson_stale_excluded_from_line_but_present_as_point(self, harness):
        device = harness.add_device()
        harness.pipeline.ingest(device.device_id, fix_message(lat=5.0), T0, "m1")
        harness.pipeline.ingest(device.device_id, fix_message(lat=5.01, stale=True),
                                T0 + timedelta(minutes=1), "m2")
        harness.pipeline.ingest(device.device_id, fix_message(lat=5.02),
                                T0 + timedelta(minutes=2), "m3")
        doc = json.loads(harness.pipeline.export_track(
            device.device_id, T0, T0 + timedelta(hours=1), "geojson"))
        line = next(f for f in doc["features"] if f["geometry"]["type"] == "LineString")
        points = [f for f in doc["features"] if f["geometry"]["type"] == "Point"]
        assert len(line["geometry"]["coordinates"]) == 2  # stale excluded
        assert len(points) == 3
        qualities = {p["properties"]["fix_quality"] for p in points}
        assert qualities == {"fresh", "stale"}

    def test_empty_track_is_valid_empty_collection(self, harness):
        device = harness.add_device()
        doc = json.loads(harness.pipeline.export_track(
            device.device_id, T0, T0 + timedelta(hours=1), "geojson"))
        assert doc == {"type": "FeatureCollection", "features": []}
