"""Position ingestion, track queries and track export.

Positions are ordered by server receive time (device clocks are untrusted),
carry a fix-quality flag derived from the message kind, and are idempotent
on the source message id.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Optional

from .codec import MessageKind, TrackerMessage
from .errors import SmsTrackError, UnknownDevice
from .registry import DeviceRegistry
from .store import POSITIONS_NS, Store
from .timeutil import format_ts, parse_ts

FIX_QUALITY = {
    MessageKind.FIX: "fresh",
    MessageKind.LAST_KNOWN_FIX: "stale",
    MessageKind.INCOMPLETE: "salvaged",
}

EXPORT_FORMATS = ("csv", "geojson")

_MSG_INDEX_NS = "position_by_message"


@dataclass(frozen=True)
class Position:
    position_id: str
    device_id: str
    latitude: float
    longitude: float
    speed_kmh: Optional[float]
    battery_percent: Optional[int]
    fix_quality: str  # "fresh" | "stale" | "salvaged"
    is_repeat: bool
    device_time: Optional[datetime]
    server_time: datetime
    source_message_id: str

    def to_record(self) -> dict:
        return {
            "position_id": self.position_id,
            "device_id": self.device_id,
            "latitude": self.latitude,
            "longitude": self.longitude,
            "speed_kmh": self.speed_kmh,
            "battery_percent": self.battery_percent,
            "fix_quality": self.fix_quality,
            "is_repeat": self.is_repeat,
            "device_time": format_ts(self.device_time) if self.device_time else None,
            "server_time": format_ts(self.server_time),
            "source_message_id": self.source_message_id,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Position":
        return cls(
            position_id=rec["position_id"],
            device_id=rec["device_id"],
            latitude=rec["latitude"],
            longitude=rec["longitude"],
            speed_kmh=rec.get("speed_kmh"),
            battery_percent=rec.get("battery_percent"),
            fix_quality=rec["fix_quality"],
            is_repeat=rec.get("is_repeat", False),
            device_time=parse_ts(rec["device_time"]) if rec.get("device_time") else None,
            server_time=parse_ts(rec["server_time"]),
            source_message_id=rec["source_message_id"],
        )


class PositionPipeline:
    def __init__(self, store: Store, registry: DeviceRegistry):
        self._store = store
        self._registry = registry

    def ingest(self, device_id: str, msg: TrackerMessage,
               server_time: datetime, source_message_id: str) -> Optional[Position]:
        """Store a position for a decoded message; returns None for messages
        that carry no usable coordinates. Re-ingesting the same source
        message id returns the existing position unchanged."""
        if not self._registry.has_device(device_id):
            raise UnknownDevice(f"no device with id {device_id!r}")

        existing = self._store.get(_MSG_INDEX_NS, source_message_id)
        if existing is not None:
            rec = self._store.get(POSITIONS_NS, existing["position_id"])
            return Position.from_record(rec) if rec else None

        quality = FIX_QUALITY.get(msg.kind)
        if quality is None or msg.latitude is None or msg.longitude is None:
            return None

        last = self._store.last_position(device_id)
        # per-device timelines are strictly increasing in server_time
        if last is not None:
            last_time = parse_ts(last["server_time"])
            if server_time <= last_time:
                server_time = last_time + timedelta(microseconds=1)

        is_repeat = bool(
            last is not None
            and quality == "stale"
            and last["fix_quality"] == "stale"
            and last["latitude"] == msg.latitude
            and last["longitude"] == msg.longitude
        )

        with self._store.transaction():
            position = Position(
                position_id=self._store.next_id("pos"),
                device_id=device_id,
                latitude=msg.latitude,
                longitude=msg.longitude,
                speed_kmh=msg.speed_kmh,
                battery_percent=msg.battery_percent,
                fix_quality=quality,
                is_repeat=is_repeat,
                device_time=msg.device_time,
                server_time=server_time,
                source_message_id=source_message_id,
            )
            self._store.put(POSITIONS_NS, position.position_id, position.to_record())
            self._store.put(_MSG_INDEX_NS, source_message_id,
                            {"position_id": position.position_id})
        return position

    def query_track(self, device_id: str, time_from: datetime, time_to: datetime,
                    cursor: Optional[tuple[str, str]] = None,
                    limit: Optional[int] = None) -> list[Position]:
        """Positions in [time_from, time_to] ascending by (server_time, id).
        ``cursor`` is the (server_time, position_id) of the last row already
        seen; pagination never duplicates or skips rows."""
        if not self._registry.has_device(device_id):
            raise UnknownDevice(f"no device with id {device_id!r}")
        if time_from > time_to:
            raise SmsTrackError("time_from must be <= time_to")
        records = self._store.scan_positions(
            device_id, format_ts(time_from), format_ts(time_to),
            after=cursor, limit=limit)
        return [Position.from_record(r) for r in records]

    def last_position(self, device_id: str) -> Optional[Position]:
        rec = self._store.last_position(device_id)
        return Position.from_record(rec) if rec else None

    def export_track(self, device_id: str, time_from: datetime, time_to: datetime,
                     fmt: str) -> str:
        if fmt not in EXPORT_FORMATS:
            raise SmsTrackError(f"unsupported export format {fmt!r}")
        positions = self.query_track(device_id, time_from, time_to)
        if fmt == "csv":
            return _to_csv(positions)
        return _to_geojson(positions)


def _to_csv(positions: list[Position]) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["server_time", "latitude", "longitude", "speed",
                     "battery_percent", "fix_quality"])
    for p in positions:
        writer.writerow([
            format_ts(p.server_time),
            f"{p.latitude:.6f}",
            f"{p.longitude:.6f}",
            "" if p.speed_kmh is None else p.speed_kmh,
            "" if p.battery_percent is None else p.battery_percent,
            p.fix_quality,
        ])
    return out.getvalue()


def _to_geojson(positions: list[Position]) -> str:
    """LineString through fresh fixes plus one Point per stored position."""
    features = []
    fresh = [p for p in positions if p.fix_quality == "fresh"]
    if len(fresh) >= 2:
        features.append({
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": [[p.longitude, p.latitude] for p in fresh],
            },
            "properties": {"kind": "track"},
        })
    for p in positions:
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [p.longitude, p.latitude]},
            "properties": {
                "position_id": p.position_id,
                "device_id": p.device_id,
                "server_time": format_ts(p.server_time),
                "fix_quality": p.fix_quality,
                "is_repeat": p.is_repeat,
                "speed_kmh": p.speed_kmh,
                "battery_percent": p.battery_percent,
            },
        })
    return json.dumps({"type": "FeatureCollection", "features": features}, indent=2)
