"""Five-field cron expressions: parsing and next-occurrence computation.

Grammar per field: ``*``, single values, ranges ``a-b``, steps ``*/n`` and
``a-b/n``, and comma lists of any of those. Fields are minute, hour,
day-of-month, month, day-of-week (0-7, both 0 and 7 meaning Sunday).
Standard day-matching rule: when both day-of-month and day-of-week are
restricted, a date matches if either does.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone, tzinfo
from functools import lru_cache
from typing import FrozenSet

from .errors import CronSyntaxError, NoFutureOccurrence

FIELD_NAMES = ("minute", "hour", "day-of-month", "month", "day-of-week")
FIELD_RANGES = ((0, 59), (0, 23), (1, 31), (1, 12), (0, 7))

# Scanning horizon for expressions that can never match (e.g. "0 0 30 2 *").
_MAX_YEARS_AHEAD = 5


@dataclass(frozen=True)
class CronSpec:
    expr: str
    minutes: FrozenSet[int]
    hours: FrozenSet[int]
    days: FrozenSet[int]
    months: FrozenSet[int]
    weekdays: FrozenSet[int]  # 0 = Sunday .. 6 = Saturday
    dom_restricted: bool
    dow_restricted: bool

    def matches(self, local: datetime) -> bool:
        """True when the wall-clock minute satisfies the expression."""
        if local.minute not in self.minutes or local.hour not in self.hours:
            return False
        if local.month not in self.months:
            return False
        return self.matches_day(local)

    def matches_day(self, local: datetime) -> bool:
        dom_ok = local.day in self.days
        dow_ok = ((local.weekday() + 1) % 7) in self.weekdays
        if self.dom_restricted and self.dow_restricted:
            return dom_ok or dow_ok
        if self.dom_restricted:
            return dom_ok
        if self.dow_restricted:
            return dow_ok
        return True


def _parse_value(index: int, text: str, lo: int, hi: int) -> int:
    if not text.isdigit():
        raise CronSyntaxError(index, f"invalid value {text!r}")
    value = int(text)
    if not lo <= value <= hi:
        raise CronSyntaxError(index, f"value {value} out of range {lo}-{hi}")
    return value


def _parse_field(index: int, text: str) -> set[int]:
    lo, hi = FIELD_RANGES[index]
    values: set[int] = set()
    if not text:
        raise CronSyntaxError(index, "empty field")
    for item in text.split(","):
        step = 1
        if "/" in item:
            item, _, step_text = item.partition("/")
            if not step_text.isdigit() or int(step_text) < 1:
                raise CronSyntaxError(index, f"invalid step {step_text!r}")
            step = int(step_text)
        if item == "*":
            start, end = lo, hi
        elif "-" in item and not item.startswith("-"):
            start_text, _, end_text = item.partition("-")
            start = _parse_value(index, start_text, lo, hi)
            end = _parse_value(index, end_text, lo, hi)
            if start > end:
                raise CronSyntaxError(index, f"reversed range {item!r}")
        else:
            start = end = _parse_value(index, item, lo, hi)
            if step != 1:
                # "5/2" style steps only make sense from a range or *
                start, end = start, hi
        values.update(range(start, end + 1, step))
    return values


@lru_cache(maxsize=512)
def parse_cron(expr: str) -> CronSpec:
    parts = expr.split()
    if len(parts) != 5:
        raise CronSyntaxError(0, f"expected 5 fields, got {len(parts)}")
    minutes = _parse_field(0, parts[0])
    hours = _parse_field(1, parts[1])
    days = _parse_field(2, parts[2])
    months = _parse_field(3, parts[3])
    weekdays = {d % 7 for d in _parse_field(4, parts[4])}
    return CronSpec(
        expr=expr,
        minutes=frozenset(minutes),
        hours=frozenset(hours),
        days=frozenset(days),
        months=frozenset(months),
        weekdays=frozenset(weekdays),
        dom_restricted=parts[2] != "*",
        dow_restricted=parts[4] != "*",
    )


def _to_wall(t: datetime, zone: tzinfo) -> datetime:
    return t.astimezone(zone).replace(tzinfo=None)


def _from_wall(wall: datetime, zone: tzinfo) -> datetime:
    return wall.replace(tzinfo=zone, fold=0).astimezone(timezone.utc)


def next_fire(spec: CronSpec, after: datetime, zone: tzinfo = timezone.utc) -> datetime:
    """Earliest matching minute strictly later than ``after``, as UTC.

    Advances field by field (month -> day -> hour -> minute) instead of
    scanning every minute, so far-future expressions stay cheap.
    """
    if after.tzinfo is None:
        after = after.replace(tzinfo=timezone.utc)
    t = _to_wall(after, zone).replace(second=0, microsecond=0) + timedelta(minutes=1)
    limit_year = t.year + _MAX_YEARS_AHEAD
    while True:
        if t.year > limit_year:
            raise NoFutureOccurrence(f"no occurrence of {spec.expr!r} within {_MAX_YEARS_AHEAD} years")
        if t.month not in spec.months:
            month = t.month + 1
            year = t.year
            if month > 12:
                month, year = 1, year + 1
            t = t.replace(year=year, month=month, day=1, hour=0, minute=0)
            continue
        if not spec.matches_day(t):
            t = (t + timedelta(days=1)).replace(hour=0, minute=0)
            continue
        if t.hour not in spec.hours:
            later = sorted(h for h in spec.hours if h > t.hour)
            if not later:
                t = (t + timedelta(days=1)).replace(hour=0, minute=0)
                continue
            t = t.replace(hour=later[0], minute=0)
        if t.minute not in spec.minutes:
            later = sorted(m for m in spec.minutes if m > t.minute)
            if not later:
                t = (t + timedelta(hours=1)).replace(minute=0)
                continue
            t = t.replace(minute=later[0])
            continue
        return _from_wall(t, zone)
