"""Encoder/decoder for the locator SMS grammar.

Wire format (documented in docs/protocol.md):

    [LAST ]lat:<d.6> lon:<d.6> speed:<d.1> bat:<int>% id:<15 digits>
        [time:<ISO-8601 Z>] http://maps.google.com/maps?q=<d.6>,<d.6>

Parsing is total: every input classifies as exactly one of Fix,
LastKnownFix, Incomplete or Unrecognized and never raises.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Optional, Tuple

from .errors import CodecError, InvalidPassword

LOCATE_PREFIX = "smslink"
STALE_MARKER = "LAST"

_PASSWORD_RE = re.compile(r"^\d{6}$")
_IMEI_RE = re.compile(r"^\d{15}$")
_URL_RE = re.compile(r"^https?://\S+$")
_URL_COORDS_RE = re.compile(r"[?&]q=(-?\d+(?:\.\d+)?),(-?\d+(?:\.\d+)?)")
_KV_KEYS = ("lat", "lon", "speed", "bat", "id", "time")


class MessageKind(Enum):
    FIX = "fix"
    LAST_KNOWN_FIX = "last_known_fix"
    INCOMPLETE = "incomplete"
    UNRECOGNIZED = "unrecognized"


@dataclass
class TrackerMessage:
    kind: MessageKind
    latitude: Optional[float] = None
    longitude: Optional[float] = None
    speed_kmh: Optional[float] = None
    battery_percent: Optional[int] = None
    maps_url: Optional[str] = None
    imei: Optional[str] = None
    device_time: Optional[datetime] = None
    raw: str = field(default="", repr=False)


def encode_locate_command(password: str) -> str:
    """Build the SMS body that asks a locator for its position."""
    if not isinstance(password, str) or not _PASSWORD_RE.match(password):
        raise InvalidPassword(f"password must be exactly six decimal digits, got {password!r}")
    return LOCATE_PREFIX + password


def salvage_coordinates_from_url(url: str) -> Optional[Tuple[float, float]]:
    """Pull a q=<lat>,<lon> pair out of a maps link, if present and in range."""
    m = _URL_COORDS_RE.search(url or "")
    if not m:
        return None
    lat, lon = float(m.group(1)), float(m.group(2))
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        return None
    return (lat, lon)


def _parse_float(text: str) -> Optional[float]:
    try:
        return float(text)
    except ValueError:
        return None


def _parse_device_time(text: str) -> Optional[datetime]:
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def parse_tracker_response(raw: str) -> TrackerMessage:
    """Classify one inbound SMS body. Never raises.

    Precedence: the LAST staleness marker is checked before the full fix
    grammar; a body carrying a URL but no valid fix degrades to Incomplete;
    everything else is Unrecognized with the raw text retained.
    """
    text = raw if isinstance(raw, str) else ""
    tokens = text.split()
    if not tokens:
        return TrackerMessage(kind=MessageKind.UNRECOGNIZED, raw=text)

    stale = tokens[0] == STALE_MARKER
    body = tokens[1:] if stale else tokens

    url = None
    fields: dict[str, str] = {}
    for tok in body:
        if url is None and _URL_RE.match(tok):
            url = tok
            continue
        key, sep, value = tok.partition(":")
        if sep and key in _KV_KEYS and key not in fields:
            fields[key] = value

    lat = _parse_float(fields["lat"]) if "lat" in fields else None
    lon = _parse_float(fields["lon"]) if "lon" in fields else None
    if lat is not None and not -90.0 <= lat <= 90.0:
        lat = None
    if lon is not None and not -180.0 <= lon <= 180.0:
        lon = None

    speed = _parse_float(fields["speed"]) if "speed" in fields else None
    if speed is not None and speed < 0:
        speed = None

    battery = None
    if "bat" in fields and fields["bat"].endswith("%"):
        try:
            battery = int(fields["bat"][:-1])
        except ValueError:
            battery = None
        if battery is not None and not 0 <= battery <= 100:
            battery = None

    imei = fields.get("id")
    if imei is not None and not _IMEI_RE.match(imei):
        imei = None

    device_time = _parse_device_time(fields["time"]) if "time" in fields else None

    coords_ok = lat is not None and lon is not None
    if stale and coords_ok:
        return TrackerMessage(
            kind=MessageKind.LAST_KNOWN_FIX,
            latitude=lat, longitude=lon, speed_kmh=speed,
            battery_percent=battery, maps_url=url, imei=imei,
            device_time=device_time, raw=text,
        )
    if not stale and coords_ok and speed is not None and battery is not None \
            and imei is not None and url is not None:
        return TrackerMessage(
            kind=MessageKind.FIX,
            latitude=lat, longitude=lon, speed_kmh=speed,
            battery_percent=battery, maps_url=url, imei=imei,
            device_time=device_time, raw=text,
        )
    if url is not None:
        salvaged = salvage_coordinates_from_url(url)
        return TrackerMessage(
            kind=MessageKind.INCOMPLETE,
            latitude=salvaged[0] if salvaged else None,
            longitude=salvaged[1] if salvaged else None,
            maps_url=url, raw=text,
        )
    return TrackerMessage(kind=MessageKind.UNRECOGNIZED, raw=text)


def canonical_maps_url(latitude: float, longitude: float) -> str:
    return f"http://maps.google.com/maps?q={latitude:.6f},{longitude:.6f}"


def format_tracker_response(msg: TrackerMessage) -> str:
    """Render a Fix/LastKnownFix back to the wire grammar.

    Inverse of parse_tracker_response for messages with all fields present
    and coordinates quantized to 6 decimal places.
    """
    if msg.kind not in (MessageKind.FIX, MessageKind.LAST_KNOWN_FIX):
        raise CodecError(f"cannot format message of kind {msg.kind.value}")
    missing = [name for name, value in (
        ("latitude", msg.latitude), ("longitude", msg.longitude),
        ("speed_kmh", msg.speed_kmh), ("battery_percent", msg.battery_percent),
        ("imei", msg.imei),
    ) if value is None]
    if missing:
        raise CodecError(f"missing fields for formatting: {', '.join(missing)}")
    if not _IMEI_RE.match(msg.imei):
        raise CodecError(f"imei must be 15 decimal digits, got {msg.imei!r}")

    parts = []
    if msg.kind is MessageKind.LAST_KNOWN_FIX:
        parts.append(STALE_MARKER)
    parts.append(f"lat:{msg.latitude:.6f}")
    parts.append(f"lon:{msg.longitude:.6f}")
    parts.append(f"speed:{msg.speed_kmh:.1f}")
    parts.append(f"bat:{msg.battery_percent}%")
    parts.append(f"id:{msg.imei}")
    if msg.device_time is not None:
        stamp = msg.device_time.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        parts.append(f"time:{stamp}")
    parts.append(msg.maps_url or canonical_maps_url(msg.latitude, msg.longitude))
    return " ".join(parts)
