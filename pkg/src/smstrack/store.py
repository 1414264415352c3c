"""Embedded durable store: write-ahead journal plus per-namespace snapshots.

Records are JSON dicts keyed by (namespace, id). Every commit appends one
journal line; recovery loads the last snapshot and replays the journal.
A torn final journal line (crash mid-write) is discarded as uncommitted;
corruption anywhere else refuses to open rather than recover partially.
"""

from __future__ import annotations

import json
import os
import shutil
import tarfile
import tempfile
import threading
from bisect import bisect_left, bisect_right, insort
from pathlib import Path
from typing import Optional

from .errors import CorruptStore, VersionMismatch

FORMAT_VERSION = 1

WAL_FILE = "wal.log"
SNAPSHOT_DIR = "snapshot"
MANIFEST_FILE = "manifest.json"

# namespaces with known secondary indexes
POSITIONS_NS = "positions"


class Store:
    """Single-directory store; one writer at a time, snapshot-consistent reads."""

    def __init__(self, path: str | os.PathLike, fsync: bool = True,
                 compact_every: int = 10000):
        self.path = Path(path)
        self.fsync = fsync
        self.compact_every = compact_every
        self._lock = threading.RLock()
        self._data: dict[str, dict[str, dict]] = {}
        # positions secondary index: device_id -> sorted [(server_time, id)]
        self._pos_index: dict[str, list[tuple[str, str]]] = {}
        self._wal_fh = None
        self._pending: Optional[list[dict]] = None
        self._undo: list[tuple[str, str, Optional[dict]]] = []
        self._commits_since_compact = 0
        self._open()

    # -- lifecycle -----------------------------------------------------------

    def _open(self) -> None:
        self.path.mkdir(parents=True, exist_ok=True)
        snapdir = self.path / SNAPSHOT_DIR
        if snapdir.exists():
            self._load_snapshot(snapdir)
        self._replay_wal(self.path / WAL_FILE)
        self._wal_fh = open(self.path / WAL_FILE, "a", encoding="utf-8")

    def _load_snapshot(self, snapdir: Path) -> None:
        manifest_path = snapdir / MANIFEST_FILE
        if not manifest_path.exists():
            raise CorruptStore(f"snapshot without manifest at {snapdir}")
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorruptStore(f"unreadable manifest: {exc}") from exc
        version = manifest.get("format_version")
        if version != FORMAT_VERSION:
            raise VersionMismatch(f"snapshot format {version}, supported {FORMAT_VERSION}")
        for ns_file in sorted(snapdir.glob("*.jsonl")):
            ns = ns_file.stem
            with open(ns_file, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise CorruptStore(
                            f"{ns_file.name}:{lineno}: invalid record: {exc}") from exc
                    self._apply_put(ns, rec["_id"], rec["record"])

    def _replay_wal(self, wal_path: Path) -> None:
        if not wal_path.exists():
            return
        raw = wal_path.read_bytes()
        if not raw:
            return
        lines = raw.split(b"\n")
        torn_tail = lines[-1] != b""  # file should end with a newline
        body = lines[:-1]
        tail = lines[-1] if torn_tail else None
        for lineno, line in enumerate(body, 1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                ops = entry["txn"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorruptStore(f"journal line {lineno}: invalid entry: {exc}") from exc
            for op in ops:
                if op["op"] == "put":
                    self._apply_put(op["ns"], op["id"], op["rec"])
                elif op["op"] == "del":
                    self._apply_delete(op["ns"], op["id"])
                else:
                    raise CorruptStore(f"journal line {lineno}: unknown op {op['op']!r}")
        if torn_tail:
            self._truncate_wal(wal_path, b"\n".join(body) + (b"\n" if body else b""))

    @staticmethod
    def _truncate_wal(wal_path: Path, keep: bytes) -> None:
        with open(wal_path, "wb") as fh:
            fh.write(keep)
            fh.flush()
            os.fsync(fh.fileno())

    def close(self) -> None:
        with self._lock:
            if self._wal_fh is None:
                return
            self.compact()
            self._wal_fh.close()
            self._wal_fh = None

    # -- journalled mutation --------------------------------------------------

    def transaction(self) -> "_Transaction":
        return _Transaction(self)

    def put(self, ns: str, record_id: str, record: dict) -> None:
        with self._lock:
            op = {"op": "put", "ns": ns, "id": record_id, "rec": record}
            if self._pending is not None:
                self._undo.append((ns, record_id, self._data.get(ns, {}).get(record_id)))
                self._pending.append(op)
                self._apply_put(ns, record_id, record)
            else:
                self._commit([op])
                self._apply_put(ns, record_id, record)

    def delete(self, ns: str, record_id: str) -> None:
        with self._lock:
            op = {"op": "del", "ns": ns, "id": record_id}
            if self._pending is not None:
                self._undo.append((ns, record_id, self._data.get(ns, {}).get(record_id)))
                self._pending.append(op)
                self._apply_delete(ns, record_id)
            else:
                self._commit([op])
                self._apply_delete(ns, record_id)

    def _commit(self, ops: list[dict]) -> None:
        if self._wal_fh is None:
            raise CorruptStore("store is closed")
        line = json.dumps({"txn": ops}, separators=(",", ":"), sort_keys=True)
        self._wal_fh.write(line + "\n")
        self._wal_fh.flush()
        if self.fsync:
            os.fsync(self._wal_fh.fileno())
        self._commits_since_compact += 1
        if self._commits_since_compact >= self.compact_every:
            self.compact()

    def _apply_put(self, ns: str, record_id: str, record: dict) -> None:
        bucket = self._data.setdefault(ns, {})
        if ns == POSITIONS_NS:
            old = bucket.get(record_id)
            if old is not None:
                self._index_remove(old, record_id)
            self._index_add(record, record_id)
        bucket[record_id] = record

    def _apply_delete(self, ns: str, record_id: str) -> None:
        bucket = self._data.get(ns, {})
        old = bucket.pop(record_id, None)
        if ns == POSITIONS_NS and old is not None:
            self._index_remove(old, record_id)

    def _index_add(self, record: dict, record_id: str) -> None:
        entries = self._pos_index.setdefault(record["device_id"], [])
        insort(entries, (record["server_time"], record_id))

    def _index_remove(self, record: dict, record_id: str) -> None:
        entries = self._pos_index.get(record["device_id"], [])
        key = (record["server_time"], record_id)
        idx = bisect_left(entries, key)
        if idx < len(entries) and entries[idx] == key:
            entries.pop(idx)

    # -- reads -----------------------------------------------------------------

    def get(self, ns: str, record_id: str) -> Optional[dict]:
        with self._lock:
            rec = self._data.get(ns, {}).get(record_id)
            return dict(rec) if rec is not None else None

    def scan(self, ns: str) -> list[dict]:
        with self._lock:
            bucket = self._data.get(ns, {})
            return [dict(bucket[k]) for k in sorted(bucket)]

    def count(self, ns: str) -> int:
        with self._lock:
            return len(self._data.get(ns, {}))

    def scan_positions(self, device_id: str, from_ts: str, to_ts: str,
                       after: Optional[tuple[str, str]] = None,
                       limit: Optional[int] = None) -> list[dict]:
        """Positions with from_ts <= server_time <= to_ts ordered by
        (server_time, id); ``after`` is an exclusive pagination cursor."""
        with self._lock:
            entries = self._pos_index.get(device_id, [])
            lo = bisect_left(entries, (from_ts, ""))
            hi = bisect_right(entries, (to_ts, "￿"))
            window = entries[lo:hi]
            if after is not None:
                start = bisect_right(window, after)
                window = window[start:]
            if limit is not None:
                window = window[:limit]
            bucket = self._data.get(POSITIONS_NS, {})
            return [dict(bucket[rid]) for _, rid in window]

    def last_position(self, device_id: str) -> Optional[dict]:
        with self._lock:
            entries = self._pos_index.get(device_id, [])
            if not entries:
                return None
            return dict(self._data[POSITIONS_NS][entries[-1][1]])

    # -- id allocation ----------------------------------------------------------

    def next_id(self, prefix: str) -> str:
        """Monotonic persisted counter; commit rides the enclosing transaction.
        Zero-padded so lexicographic order equals allocation order."""
        with self._lock:
            counters = self._data.get("meta", {}).get("counters", {})
            value = int(counters.get(prefix, 0)) + 1
            updated = dict(counters)
            updated[prefix] = value
            self.put("meta", "counters", updated)
            return f"{prefix}-{value:08d}"

    # -- snapshots ----------------------------------------------------------------

    def compact(self) -> None:
        """Rewrite the snapshot from memory and truncate the journal."""
        with self._lock:
            snapdir = self.path / SNAPSHOT_DIR
            tmpdir = Path(tempfile.mkdtemp(dir=self.path, prefix="snapshot."))
            self._write_snapshot_files(tmpdir)
            if snapdir.exists():
                backup = self.path / (SNAPSHOT_DIR + ".old")
                if backup.exists():
                    shutil.rmtree(backup)
                snapdir.rename(backup)
                tmpdir.rename(snapdir)
                shutil.rmtree(backup)
            else:
                tmpdir.rename(snapdir)
            if self._wal_fh is not None:
                self._wal_fh.close()
            self._truncate_wal(self.path / WAL_FILE, b"")
            self._wal_fh = open(self.path / WAL_FILE, "a", encoding="utf-8")
            self._commits_since_compact = 0

    def _write_snapshot_files(self, outdir: Path) -> None:
        outdir.mkdir(parents=True, exist_ok=True)
        counts = {}
        for ns in sorted(self._data):
            bucket = self._data[ns]
            counts[ns] = len(bucket)
            with open(outdir / f"{ns}.jsonl", "w", encoding="utf-8") as fh:
                for rid in sorted(bucket):
                    fh.write(json.dumps({"_id": rid, "record": bucket[rid]},
                                        separators=(",", ":"), sort_keys=True) + "\n")
        manifest = {"format_version": FORMAT_VERSION, "record_counts": counts}
        (outdir / MANIFEST_FILE).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def snapshot_export(self, archive_path: str | os.PathLike) -> None:
        """Portable tar archive of per-namespace record files plus manifest."""
        with self._lock:
            with tempfile.TemporaryDirectory() as tmp:
                tmpdir = Path(tmp) / "snapshot"
                self._write_snapshot_files(tmpdir)
                with tarfile.open(archive_path, "w:gz") as tar:
                    tar.add(tmpdir / MANIFEST_FILE, arcname=MANIFEST_FILE)
                    for ns_file in sorted(tmpdir.glob("*.jsonl")):
                        tar.add(ns_file, arcname=ns_file.name)

    def snapshot_import(self, archive_path: str | os.PathLike) -> None:
        """Load an exported archive into this (empty) store."""
        with self._lock:
            if any(self._data.values()):
                raise CorruptStore("snapshot_import requires an empty store")
            with tempfile.TemporaryDirectory() as tmp:
                with tarfile.open(archive_path, "r:*") as tar:
                    tar.extractall(tmp)
                tmpdir = Path(tmp)
                if not (tmpdir / MANIFEST_FILE).exists():
                    raise CorruptStore("archive has no manifest")
                manifest = json.loads((tmpdir / MANIFEST_FILE).read_text(encoding="utf-8"))
                if manifest.get("format_version") != FORMAT_VERSION:
                    raise VersionMismatch(
                        f"archive format {manifest.get('format_version')}, "
                        f"supported {FORMAT_VERSION}")
                with self.transaction():
                    for ns_file in sorted(tmpdir.glob("*.jsonl")):
                        ns = ns_file.stem
                        with open(ns_file, encoding="utf-8") as fh:
                            for line in fh:
                                line = line.strip()
                                if not line:
                                    continue
                                rec = json.loads(line)
                                self.put(ns, rec["_id"], rec["record"])


class _Transaction:
    def __init__(self, store: Store):
        self._store = store

    def __enter__(self):
        self._store._lock.acquire()
        if self._store._pending is not None:
            self._store._lock.release()
            raise CorruptStore("nested transactions are not supported")
        self._store._pending = []
        self._store._undo = []
        return self._store

    def __exit__(self, exc_type, exc, tb):
        try:
            ops = self._store._pending
            undo = self._store._undo
            self._store._pending = None
            self._store._undo = []
            if exc_type is None and ops:
                try:
                    self._store._commit(ops)
                except Exception:
                    for ns, record_id, old in reversed(undo):
                        if old is None:
                            self._store._apply_delete(ns, record_id)
                        else:
                            self._store._apply_put(ns, record_id, old)
                    raise
            elif exc_type is not None and undo:
                # restore in-memory state touched by the failed transaction
                for ns, record_id, old in reversed(undo):
                    if old is None:
                        self._store._apply_delete(ns, record_id)
                    else:
                        self._store._apply_put(ns, record_id, old)
        finally:
            self._store._lock.release()
        return False
