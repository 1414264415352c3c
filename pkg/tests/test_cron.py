import random
from datetime import datetime, timedelta, timezone
from zoneinfo import ZoneInfo

import pytest

from smstrack.cron import next_fire, parse_cron
from smstrack.errors import CronSyntaxError, NoFutureOccurrence

from oracles import cron_next_brute


def utc(*args):
    return datetime(*args, tzinfo=timezone.utc)


class TestParse:
    def test_star_fields(self):
        spec = parse_cron("* * * * *")
        assert spec.minutes == frozenset(range(60))
        assert spec.hours == frozenset(range(24))
        assert spec.days == frozenset(range(1, 32))
        assert spec.months == frozenset(range(1, 13))
        assert spec.weekdays == frozenset(range(7))

    def test_step_expression(self):
        spec = parse_cron("*/5 * * * *")
        assert spec.minutes == frozenset(range(0, 60, 5))

    def test_weekend_afternoon_expression(self):
        spec = parse_cron("0 14-18 * * 6,0")
        assert spec.minutes == frozenset({0})
        assert spec.hours == frozenset({14, 15, 16, 17, 18})
        assert spec.weekdays == frozenset({6, 0})

    def test_range_with_step(self):
        spec = parse_cron("10-30/10 * * * *")
        assert spec.minutes == frozenset({10, 20, 30})

    def test_seven_normalizes_to_sunday(self):
        assert parse_cron("* * * * 7").weekdays == frozenset({0})

    @pytest.mark.parametrize("expr,field", [
        ("61 * * * *", 0),
        ("* 24 * * *", 1),
        ("* * 0 * *", 2),
        ("* * 32 * *", 2),
        ("* * * 13 *", 3),
        ("* * * * 8", 4),
        ("*/0 * * * *", 0),
        ("5-2 * * * *", 0),
        ("a * * * *", 0),
        ("* * * *", 0),
    ])
    def test_syntax_errors_carry_field_index(self, expr, field):
        with pytest.raises(CronSyntaxError) as err:
            parse_cron(expr)
        assert err.value.field_index == field


class TestNextFire:
    def test_every_five_minutes(self):
        spec = parse_cron("*/5 * * * *")
        assert next_fire(spec, utc(2024, 6, 1, 12, 2)) == utc(2024, 6, 1, 12, 5)

    def test_new_year(self):
        spec = parse_cron("0 0 1 1 *")
        assert next_fire(spec, utc(2024, 6, 1)) == utc(2025, 1, 1, 0, 0)

    def test_strictly_later_than_after(self):
        spec = parse_cron("*/5 * * * *")
        assert next_fire(spec, utc(2024, 6, 1, 12, 5)) == utc(2024, 6, 1, 12, 10)

    def test_dom_dow_union_rule(self):
        # 2024-06-01 is a Saturday; both day 15 and saturdays match
        spec = parse_cron("0 0 15 * 6")
        assert next_fire(spec, utc(2024, 6, 1, 0, 0)) == utc(2024, 6, 8, 0, 0)
        assert next_fire(spec, utc(2024, 6, 9, 0, 0)) == utc(2024, 6, 15, 0, 0)

    def test_impossible_date_raises(self):
        spec = parse_cron("0 0 30 2 *")
        with pytest.raises(NoFutureOccurrence):
            next_fire(spec, utc(2024, 1, 1))

    def test_timezone_wall_clock(self):
        spec = parse_cron("0 9 * * *")
        zone = ZoneInfo("Europe/London")
        # BST in June: 09:00 local is 08:00 UTC
        fire = next_fire(spec, utc(2024, 6, 1, 0, 0), zone)
        assert fire == utc(2024, 6, 1, 8, 0)

    def test_leap_day(self):
        spec = parse_cron("0 12 29 2 *")
        assert next_fire(spec, utc(2023, 3, 1)) == utc(2024, 2, 29, 12, 0)


EXAMPLE_EXPRESSIONS = [
    "* * * * *",
    "*/7 * * * *",
    "0 */6 * * *",
    "30 8 * * 1-5",
    "0 14-18 * * 6,0",
    "15,45 2,14 1 * *",
    "0 0 1 1 *",
    "*/20 9-17 * * 3",
    "5 4 */3 * *",
    "0 12 15 6,12 *",
]


class TestAgainstBruteForce:
    @pytest.mark.parametrize("expr", EXAMPLE_EXPRESSIONS)
    def test_chained_next_fire_matches_scan(self, expr):
        spec = parse_cron(expr)
        start = datetime(2024, 3, 10, 11, 7)
        horizon = start + timedelta(days=120)
        after = start
        for _ in range(40):
            expected = cron_next_brute(spec, after, horizon)
            if expected is None:
                break
            got = next_fire(spec, after.replace(tzinfo=timezone.utc))
            assert got == expected.replace(tzinfo=timezone.utc), expr
            after = expected

    def test_randomized_expressions_agree_with_scan(self):
        rng = random.Random(4242)
        for _ in range(30):
            expr = random_cron_expr(rng)
            spec = parse_cron(expr)
            after = datetime(2024, rng.randint(1, 12), rng.randint(1, 28),
                             rng.randint(0, 23), rng.randint(0, 59))
            horizon = after + timedelta(days=400)
            for _ in range(15):
                expected = cron_next_brute(spec, after, horizon)
                if expected is None:
                    break
                got = next_fire(spec, after.replace(tzinfo=timezone.utc))
                assert got == expected.replace(tzinfo=timezone.utc), expr
                after = expected


def random_cron_expr(rng: random.Random) -> str:
    """Valid five-field expression; day-of-month capped at 28 so every
    month/day combination can occur."""

    def field(lo, hi, star_bias=0.5):
        roll = rng.random()
        if roll < star_bias:
            return "*"
        if roll < star_bias + 0.15:
            step = rng.randint(2, 7)
            return f"*/{step}"
        if roll < star_bias + 0.3:
            a = rng.randint(lo, hi - 1)
            b = rng.randint(a, hi)
            return f"{a}-{b}"
        count = rng.randint(1, 3)
        return ",".join(str(rng.randint(lo, hi)) for _ in range(count))

    return " ".join([
        field(0, 59),
        field(0, 23),
        field(1, 28, star_bias=0.7),
        field(1, 12, star_bias=0.7),
        field(0, 6, star_bias=0.6),
    ])
