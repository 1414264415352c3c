import json

import pytest

from smstrack.errors import CorruptStore, VersionMismatch
from smstrack.store import Store


@pytest.fixture
def store_path(tmp_path):
    return tmp_path / "data"


def position_record(i, device="dev-1"):
    return {
        "position_id": f"pos-{i:08d}",
        "device_id": device,
        "latitude": 5.0 + i * 1e-4,
        "longitude": 118.0,
        "server_time": f"2024-01-01T00:{i // 60:02d}:{i % 60:02d}.000000+00:00",
    }


class TestBasics:
    def test_open_empty_dir_gives_empty_store(self, store_path):
        store = Store(store_path)
        assert store.scan("devices") == []
        store.close()

    def test_put_get_delete(self, store_path):
        store = Store(store_path)
        store.put("devices", "dev-1", {"label": "car-A"})
        assert store.get("devices", "dev-1") == {"label": "car-A"}
        store.delete("devices", "dev-1")
        assert store.get("devices", "dev-1") is None
        store.close()

    def test_scan_is_sorted_by_id(self, store_path):
        store = Store(store_path)
        for i in [3, 1, 2]:
            store.put("ns", f"id-{i:04d}", {"i": i})
        assert [r["i"] for r in store.scan("ns")] == [1, 2, 3]
        store.close()

    def test_next_id_monotonic_and_padded(self, store_path):
        store = Store(store_path)
        ids = [store.next_id("job") for _ in range(3)]
        assert ids == ["job-00000001", "job-00000002", "job-00000003"]
        store.close()
        reopened = Store(store_path)
        assert reopened.next_id("job") == "job-00000004"
        reopened.close()


class TestDurability:
    def test_100_positions_survive_unclean_shutdown(self, store_path):
        store = Store(store_path)
        for i in range(100):
            rec = position_record(i)
            store.put("positions", rec["position_id"], rec)
        # no close(): simulates the process dying with the journal intact
        del store

        recovered = Store(store_path)
        assert recovered.count("positions") == 100
        assert recovered.last_position("dev-1")["position_id"] == "pos-00000099"
        recovered.close()

    def test_torn_final_line_is_discarded(self, store_path):
        store = Store(store_path)
        store.put("ns", "a", {"v": 1})
        store.put("ns", "b", {"v": 2})
        del store
        wal = store_path / "wal.log"
        with open(wal, "ab") as fh:
            fh.write(b'{"txn": [{"op": "put", "ns": "ns", "id": "c"')  # no newline
        recovered = Store(store_path)
        assert recovered.get("ns", "a") == {"v": 1}
        assert recovered.get("ns", "b") == {"v": 2}
        assert recovered.get("ns", "c") is None
        recovered.close()

    def test_mid_journal_corruption_refuses_to_open(self, store_path):
        store = Store(store_path)
        store.put("ns", "a", {"v": 1})
        store.put("ns", "b", {"v": 2})
        del store
        wal = store_path / "wal.log"
        lines = wal.read_bytes().splitlines(keepends=True)
        lines[0] = b"garbage not json\n"
        wal.write_bytes(b"".join(lines))
        with pytest.raises(CorruptStore):
            Store(store_path)

    def test_compaction_preserves_data(self, store_path):
        store = Store(store_path)
        for i in range(10):
            rec = position_record(i)
            store.put("positions", rec["position_id"], rec)
        store.compact()
        store.put("other", "x", {"y": 1})
        store.close()
        recovered = Store(store_path)
        assert recovered.count("positions") == 10
        assert recovered.get("other", "x") == {"y": 1}
        recovered.close()

    def test_transaction_atomicity_on_failure(self, store_path):
        store = Store(store_path)
        store.put("ns", "pre", {"v": 0})
        with pytest.raises(RuntimeError):
            with store.transaction():
                store.put("ns", "a", {"v": 1})
                raise RuntimeError("abort")
        assert store.get("ns", "a") is None
        assert store.get("ns", "pre") == {"v": 0}
        del store
        recovered = Store(store_path)
        assert recovered.get("ns", "a") is None
        recovered.close()


class TestPositionIndex:
    def test_range_scan_ordered(self, store_path):
        store = Store(store_path)
        for i in [5, 1, 9, 3]:
            rec = position_record(i)
            store.put("positions", rec["position_id"], rec)
        rows = store.scan_positions("dev-1", "2024-01-01T00:00:00.000000+00:00",
                                    "2024-01-01T00:00:09.000000+00:00")
        assert [r["position_id"] for r in rows] == \
            ["pos-00000001", "pos-00000003", "pos-00000005", "pos-00000009"]
        store.close()

    def test_range_bounds_inclusive(self, store_path):
        store = Store(store_path)
        for i in range(5):
            rec = position_record(i)
            store.put("positions", rec["position_id"], rec)
        rows = store.scan_positions("dev-1", "2024-01-01T00:00:01.000000+00:00",
                                    "2024-01-01T00:00:03.000000+00:00")
        assert [r["position_id"] for r in rows] == \
            ["pos-00000001", "pos-00000002", "pos-00000003"]
        store.close()

    def test_pagination_cursor(self, store_path):
        store = Store(store_path)
        for i in range(5):
            rec = position_record(i)
            store.put("positions", rec["position_id"], rec)
        lo, hi = "2024-01-01T00:00:00.000000+00:00", "2024-01-01T00:01:00.000000+00:00"
        page1 = store.scan_positions("dev-1", lo, hi, limit=2)
        cursor = (page1[-1]["server_time"], page1[-1]["position_id"])
        page2 = store.scan_positions("dev-1", lo, hi, after=cursor, limit=2)
        assert [r["position_id"] for r in page1 + page2] == \
            [f"pos-{i:08d}" for i in range(4)]
        store.close()

    def test_index_survives_restart(self, store_path):
        store = Store(store_path)
        rec = position_record(7)
        store.put("positions", rec["position_id"], rec)
        store.close()
        recovered = Store(store_path)
        assert recovered.last_position("dev-1")["position_id"] == "pos-00000007"
        recovered.close()


class TestSnapshots:
    def test_export_import_round_trip(self, store_path, tmp_path):
        store = Store(store_path)
        for i in range(20):
            rec = position_record(i)
            store.put("positions", rec["position_id"], rec)
        store.put("devices", "dev-1", {"label": "car"})
        archive = tmp_path / "backup.tar.gz"
        store.snapshot_export(archive)

        fresh = Store(tmp_path / "fresh")
        fresh.snapshot_import(archive)
        assert fresh.count("positions") == 20
        assert fresh.get("devices", "dev-1") == {"label": "car"}
        assert fresh.scan_positions("dev-1", "2024-01-01T00:00:00.000000+00:00",
                                    "2024-01-01T00:00:19.000000+00:00") == \
            store.scan_positions("dev-1", "2024-01-01T00:00:00.000000+00:00",
                                 "2024-01-01T00:00:19.000000+00:00")
        store.close()
        fresh.close()

    def test_version_mismatch_rejected(self, store_path, tmp_path):
        store = Store(store_path)
        store.put("devices", "dev-1", {"label": "car"})
        store.close()
        # rewrite the snapshot manifest with a future version
        manifest = store_path / "snapshot" / "manifest.json"
        data = json.loads(manifest.read_text())
        data["format_version"] = 999
        manifest.write_text(json.dumps(data))
        with pytest.raises(VersionMismatch):
            Store(store_path)

    def test_import_requires_empty_store(self, store_path, tmp_path):
        store = Store(store_path)
        store.put("devices", "dev-1", {"label": "car"})
        archive = tmp_path / "backup.tar.gz"
        store.snapshot_export(archive)
        with pytest.raises(CorruptStore):
            store.snapshot_import(archive)
        store.close()
