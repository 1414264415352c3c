"""Schedule kinds (date/interval/cron), activation windows and job emission.

The scheduler owns a cursor per schedule pointing at the next fire instant.
Evaluation consumes every instant that has come due; instants outside the
activation window are dropped, and when several instants were missed (e.g.
the server was down) only the most recent one yields jobs. A device with an
outstanding locate job is skipped entirely.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, time, timedelta, timezone, tzinfo
from typing import Callable, Iterator, Optional
from zoneinfo import ZoneInfo

from .cron import CronSpec, next_fire, parse_cron
from .errors import InvalidSchedule, NoFutureOccurrence

MIN_INTERVAL_S = 60  # locators are not queried more often than once a minute

WEEKDAY_NAMES = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")

MANUAL_SCHEDULE_ID = "manual"


def _parse_hhmm(text: str, what: str) -> time:
    if text == "24:00":  # end-of-day sentinel for windows running to midnight
        return time.max
    try:
        hh, mm = text.split(":")
        value = time(int(hh), int(mm))
    except (ValueError, TypeError):
        raise InvalidSchedule(f"{what} must be HH:MM, got {text!r}") from None
    return value


@dataclass(frozen=True)
class ActivationWindow:
    """Time-of-day x weekday mask; [start, end) in the window's local zone."""

    start: str  # "HH:MM"
    end: str
    days: frozenset[int]  # 0 = Monday .. 6 = Sunday
    timezone_name: Optional[str] = None

    def validate(self) -> None:
        start = _parse_hhmm(self.start, "window start")
        end = _parse_hhmm(self.end, "window end")
        if not start < end:
            raise InvalidSchedule("window start must be before end within one day")
        if not self.days:
            raise InvalidSchedule("window needs at least one weekday")
        if not all(0 <= d <= 6 for d in self.days):
            raise InvalidSchedule("window weekdays must be 0 (Mon) .. 6 (Sun)")
        if self.timezone_name is not None:
            try:
                ZoneInfo(self.timezone_name)
            except Exception:
                raise InvalidSchedule(f"unknown timezone {self.timezone_name!r}") from None

    def zone(self, default_tz: tzinfo) -> tzinfo:
        if self.timezone_name is None:
            return default_tz
        return ZoneInfo(self.timezone_name)


def window_contains(window: Optional[ActivationWindow], t: datetime,
                    default_tz: tzinfo = timezone.utc) -> bool:
    """True iff t falls on an allowed weekday with start <= local time < end."""
    if window is None:
        return True
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    local = t.astimezone(window.zone(default_tz))
    if local.weekday() not in window.days:
        return False
    start = _parse_hhmm(window.start, "window start")
    end = _parse_hhmm(window.end, "window end")
    return start <= local.time() < end


@dataclass
class Schedule:
    schedule_id: str
    kind: str  # "date" | "interval" | "cron"
    target_kind: str  # "device" | "group"
    target_id: str
    starts_at: datetime
    at: Optional[datetime] = None
    every_s: Optional[int] = None
    cron_expr: Optional[str] = None
    window: Optional[ActivationWindow] = None
    enabled: bool = True
    label: str = ""

    def validate(self) -> None:
        if self.kind not in ("date", "interval", "cron"):
            raise InvalidSchedule(f"unknown schedule kind {self.kind!r}")
        if self.target_kind not in ("device", "group"):
            raise InvalidSchedule(f"unknown target kind {self.target_kind!r}")
        populated = {
            "date": self.at is not None and self.every_s is None and self.cron_expr is None,
            "interval": self.every_s is not None and self.at is None and self.cron_expr is None,
            "cron": self.cron_expr is not None and self.at is None and self.every_s is None,
        }[self.kind]
        if not populated:
            raise InvalidSchedule(f"schedule kind {self.kind!r} requires exactly its own fields")
        if self.kind == "interval" and self.every_s < MIN_INTERVAL_S:
            raise InvalidSchedule(f"interval must be >= {MIN_INTERVAL_S} s")
        if self.kind == "cron":
            parse_cron(self.cron_expr)  # raises CronSyntaxError
        if self.window is not None:
            self.window.validate()

    def cron_spec(self) -> CronSpec:
        return parse_cron(self.cron_expr)


@dataclass(frozen=True)
class LocateJob:
    device_id: str
    fire_at: datetime
    schedule_id: str = MANUAL_SCHEDULE_ID


def window_to_record(window: Optional[ActivationWindow]) -> Optional[dict]:
    if window is None:
        return None
    return {
        "start": window.start,
        "end": window.end,
        "days": [WEEKDAY_NAMES[d] for d in sorted(window.days)],
        "timezone": window.timezone_name,
    }


def window_from_record(rec: Optional[dict]) -> Optional[ActivationWindow]:
    if rec is None:
        return None
    try:
        days = frozenset(WEEKDAY_NAMES.index(d.lower()) for d in rec.get("days", []))
    except ValueError:
        raise InvalidSchedule(
            f"window days must be names {', '.join(WEEKDAY_NAMES)}") from None
    return ActivationWindow(start=rec.get("start", "00:00"),
                            end=rec.get("end", "24:00"),
                            days=days, timezone_name=rec.get("timezone"))


def schedule_to_record(schedule: Schedule) -> dict:
    from .timeutil import format_ts  # local import: timeutil has no deps back

    return {
        "schedule_id": schedule.schedule_id,
        "kind": schedule.kind,
        "target": {"kind": schedule.target_kind, "id": schedule.target_id},
        "starts_at": format_ts(schedule.starts_at),
        "at": format_ts(schedule.at) if schedule.at else None,
        "every_s": schedule.every_s,
        "cron": schedule.cron_expr,
        "window": window_to_record(schedule.window),
        "enabled": schedule.enabled,
        "label": schedule.label,
    }


def schedule_from_record(rec: dict) -> Schedule:
    from .timeutil import parse_ts

    target = rec.get("target", {})
    return Schedule(
        schedule_id=rec["schedule_id"],
        kind=rec["kind"],
        target_kind=target.get("kind", "device"),
        target_id=target.get("id", ""),
        starts_at=parse_ts(rec["starts_at"]),
        at=parse_ts(rec["at"]) if rec.get("at") else None,
        every_s=rec.get("every_s"),
        cron_expr=rec.get("cron"),
        window=window_from_record(rec.get("window")),
        enabled=rec.get("enabled", True),
        label=rec.get("label", ""),
    )


def _first_instant(schedule: Schedule, not_before: datetime, zone: tzinfo) -> Optional[datetime]:
    """Earliest fire instant >= not_before, ignoring the window."""
    if schedule.kind == "date":
        return schedule.at if schedule.at >= not_before else None
    if schedule.kind == "interval":
        step = timedelta(seconds=schedule.every_s)
        anchor = schedule.starts_at
        if not_before <= anchor:
            return anchor
        elapsed = (not_before - anchor) / step
        k = int(elapsed)
        candidate = anchor + step * k
        if candidate < not_before:
            candidate += step
        return candidate
    # cron: next_fire is strictly-later, so step back one minute to admit
    # an instant equal to not_before itself
    try:
        return next_fire(schedule.cron_spec(), not_before - timedelta(minutes=1), zone)
    except NoFutureOccurrence:
        return None


def _next_instant(schedule: Schedule, previous: datetime, zone: tzinfo) -> Optional[datetime]:
    if schedule.kind == "date":
        return None
    if schedule.kind == "interval":
        return previous + timedelta(seconds=schedule.every_s)
    try:
        return next_fire(schedule.cron_spec(), previous, zone)
    except NoFutureOccurrence:
        return None


def iter_fire_instants(schedule: Schedule, start: datetime, end: datetime,
                       default_tz: tzinfo = timezone.utc,
                       apply_window: bool = True) -> Iterator[datetime]:
    """All fire instants in [start, end), optionally filtered by the window."""
    zone = schedule.window.zone(default_tz) if schedule.window else default_tz
    instant = _first_instant(schedule, start, zone)
    while instant is not None and instant < end:
        if not apply_window or window_contains(schedule.window, instant, default_tz):
            yield instant
        instant = _next_instant(schedule, instant, zone)


def estimate_request_count(schedule: Schedule, horizon: timedelta,
                           start: Optional[datetime] = None,
                           default_tz: tzinfo = timezone.utc) -> int:
    """Exact number of window-passing fire instants within the horizon."""
    if horizon < timedelta(days=1):
        raise InvalidSchedule("horizon must be at least one day")
    t0 = start if start is not None else schedule.starts_at
    return sum(1 for _ in iter_fire_instants(schedule, t0, t0 + horizon, default_tz))


class Scheduler:
    """Evaluates schedules against a clock and emits LocateJobs.

    ``resolve_targets`` maps (target_kind, target_id) to member device ids;
    ``has_outstanding`` implements duplicate suppression and is supplied by
    the gateway.
    """

    def __init__(self, resolve_targets: Callable[[str, str], list[str]],
                 default_tz: tzinfo = timezone.utc):
        self._resolve_targets = resolve_targets
        self._default_tz = default_tz
        self._schedules: dict[str, Schedule] = {}
        self._cursors: dict[str, Optional[datetime]] = {}

    def add(self, schedule: Schedule) -> None:
        schedule.validate()
        zone = schedule.window.zone(self._default_tz) if schedule.window else self._default_tz
        self._schedules[schedule.schedule_id] = schedule
        self._cursors[schedule.schedule_id] = _first_instant(schedule, schedule.starts_at, zone)

    def remove(self, schedule_id: str) -> None:
        self._schedules.pop(schedule_id, None)
        self._cursors.pop(schedule_id, None)

    def get(self, schedule_id: str) -> Optional[Schedule]:
        return self._schedules.get(schedule_id)

    def all(self) -> list[Schedule]:
        return list(self._schedules.values())

    def replace(self, schedule: Schedule, effect_from: Optional[datetime] = None) -> None:
        """Update in place; the fire cursor restarts from ``effect_from``."""
        schedule.validate()
        zone = schedule.window.zone(self._default_tz) if schedule.window else self._default_tz
        self._schedules[schedule.schedule_id] = schedule
        resume = effect_from if effect_from is not None else schedule.starts_at
        self._cursors[schedule.schedule_id] = _first_instant(schedule, resume, zone)

    def due_jobs(self, now: datetime,
                 has_outstanding: Callable[[str], bool] = lambda d: False) -> list[LocateJob]:
        jobs: list[LocateJob] = []
        for sid, schedule in self._schedules.items():
            zone = schedule.window.zone(self._default_tz) if schedule.window else self._default_tz
            cursor = self._cursors.get(sid)
            fired: Optional[datetime] = None
            while cursor is not None and cursor <= now:
                if window_contains(schedule.window, cursor, self._default_tz):
                    fired = cursor  # several missed instants collapse to the latest
                cursor = _next_instant(schedule, cursor, zone)
            self._cursors[sid] = cursor
            if fired is None or not schedule.enabled:
                continue
            for device_id in self._resolve_targets(schedule.target_kind, schedule.target_id):
                if has_outstanding(device_id):
                    continue
                jobs.append(LocateJob(device_id=device_id, fire_at=fired, schedule_id=sid))
        return jobs
