"""In-process event feed with monotonically increasing sequence numbers.

Publishers (the gateway/scheduler loop) append; stream consumers read the
ring buffer from any past sequence number, so a reconnecting client resumes
without gaps or duplicates as long as the buffer still covers its position.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

from .timeutil import format_ts, utc_now


@dataclass(frozen=True)
class Event:
    seq: int
    event_type: str
    at: datetime
    data: dict

    def to_payload(self) -> dict:
        return {"seq": self.seq, "type": self.event_type,
                "time": format_ts(self.at), "data": self.data}


class EventBus:
    def __init__(self, buffer_size: int = 100_000, clock=utc_now):
        self._buffer: deque[Event] = deque(maxlen=buffer_size)
        self._seq = 0
        self._lock = threading.Lock()
        self._clock = clock

    def publish(self, event_type: str, data: dict) -> Event:
        with self._lock:
            self._seq += 1
            event = Event(seq=self._seq, event_type=event_type,
                          at=self._clock(), data=data)
            self._buffer.append(event)
            return event

    @property
    def last_seq(self) -> int:
        with self._lock:
            return self._seq

    def events_after(self, seq: int, limit: Optional[int] = None) -> list[Event]:
        with self._lock:
            out = [e for e in self._buffer if e.seq > seq]
        return out[:limit] if limit is not None else out

    def oldest_buffered_seq(self) -> Optional[int]:
        with self._lock:
            return self._buffer[0].seq if self._buffer else None
