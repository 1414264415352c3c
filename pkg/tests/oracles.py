"""Brute-force reference implementations the fast paths are checked against."""

from datetime import date, datetime, timedelta, timezone


def cron_day_matches(spec, d: date) -> bool:
    # re-stated day rule: restricted dom/dow union, else whichever is restricted
    dom_ok = d.day in spec.days
    dow_ok = ((d.weekday() + 1) % 7) in spec.weekdays
    if spec.dom_restricted and spec.dow_restricted:
        return dom_ok or dow_ok
    if spec.dom_restricted:
        return dom_ok
    if spec.dow_restricted:
        return dow_ok
    return True


def enumerate_cron_instants(spec, start_wall: datetime, end_wall: datetime):
    """Every matching wall-clock minute in [start_wall, end_wall), by linear
    scan over days and the hour x minute grid."""
    times = [(h, m) for h in sorted(spec.hours) for m in sorted(spec.minutes)]
    day = start_wall.date()
    while True:
        day_start = datetime(day.year, day.month, day.day)
        if day_start >= end_wall:
            return
        if day_start.month in spec.months and cron_day_matches(spec, day):
            for h, m in times:
                t = day_start.replace(hour=h, minute=m)
                if start_wall <= t < end_wall:
                    yield t
        day += timedelta(days=1)


def cron_next_brute(spec, after_wall: datetime, horizon_wall: datetime):
    """First matching wall minute strictly after after_wall, or None."""
    start = (after_wall + timedelta(minutes=1)).replace(second=0, microsecond=0)
    for t in enumerate_cron_instants(spec, start, horizon_wall):
        return t
    return None


def count_interval_fires_brute(anchor: datetime, every_s: int,
                               start: datetime, end: datetime,
                               window_pred) -> int:
    """Minute-scan count of interval fire instants passing the window."""
    count = 0
    t = start.replace(second=0, microsecond=0)
    while t < end:
        if t >= anchor and (t - anchor).total_seconds() % every_s == 0:
            if window_pred(t):
                count += 1
        t += timedelta(minutes=1)
    return count
