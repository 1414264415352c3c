"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with the measured value and enforcing its runtime budget.

Run with `pytest tests/test_acceptance.py -v -s` to see the criterion lines.
"""

import itertools
import json
import math
import random
import time
from contextlib import contextmanager
from datetime import datetime, timedelta, timezone

import pytest
from fastapi.testclient import TestClient

from smstrack.cli import main as cli_main
from smstrack.codec import MessageKind, parse_tracker_response, format_tracker_response
from smstrack.cron import next_fire, parse_cron
from smstrack.energy import BatteryModel, predict_lifetime
from smstrack.errors import DuplicateOutstanding
from smstrack.gateway import InboundSms
from smstrack.noise import LatencyModel, default_error_model, sample_radial_error
from smstrack.scheduling import ActivationWindow, Schedule, estimate_request_count, window_contains
from smstrack.service.app import create_app
from smstrack.service.config import ServerConfig
from smstrack.service.runtime import ServerRuntime
from smstrack.simulator import DEFAULT_START, ScenarioConfig, build_locator, run_scenario
from smstrack.store import Store

from conftest import Harness
from oracles import cron_next_brute, enumerate_cron_instants
from test_cron import random_cron_expr
from test_codec import random_fix


@contextmanager
def criterion(name: str, budget_s: float):
    start = time.time()
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE FAIL: {name}")
        raise
    elapsed = time.time() - start
    print(f"\nACCEPTANCE PASS: {name} ({elapsed:.1f}s, budget {budget_s:.0f}s)")
    assert elapsed < budget_s, f"{name} exceeded its {budget_s}s runtime budget"


def stationary_config(every_s, duration_min, seed=2024, n=1):
    return ScenarioConfig.from_dict({
        "seed": seed,
        "duration_min": duration_min,
        "locators": [{"label": f"car-{i}", "route": [{"lat": 5.41, "lon": 118.037}]}
                     for i in range(n)],
        "groups": [{"name": "fleet", "members": [f"car-{i}" for i in range(n)]}],
        "schedules": [{"kind": "interval", "every_s": every_s,
                       "target": {"group": "fleet"}}],
    })


def test_battery_endpoints_reproduce_measured_lifetimes(tmp_path, capsys):
    """fit-battery on (1 -> 715, 20 -> 3637) at 850 mAh reproduces both
    lifetimes within +/- 1 minute, through the CLI endpoints."""
    with criterion("battery endpoints reproduce 715/3637 min +/- 1", budget_s=1.0):
        model_path = tmp_path / "model.json"
        code = cli_main(["fit-battery", "--points", "1:715,20:3637",
                         "--capacity", "850", "--out", str(model_path)])
        assert code == 0
        capsys.readouterr()

        code = cli_main(["predict-lifetime", "--model", str(model_path),
                         "--interval", "1"])
        assert code == 0
        at_1 = float(capsys.readouterr().out.strip())
        code = cli_main(["predict-lifetime", "--model", str(model_path),
                         "--interval", "20"])
        assert code == 0
        at_20 = float(capsys.readouterr().out.strip())

        assert abs(at_1 - 715.0) <= 1.0, f"interval 1 min: {at_1}"
        assert abs(at_20 - 3637.0) <= 1.0, f"interval 20 min: {at_20}"
        model = BatteryModel.load(model_path)
        assert abs(predict_lifetime(model, 1) - 715.0) <= 1.0
        assert abs(predict_lifetime(model, 20) - 3637.0) <= 1.0


def test_battery_curve_monotone_non_decreasing(capsys):
    """Lifetime never decreases as the query interval grows (1..60 min)."""
    with criterion("battery curve monotone over 1..60 min", budget_s=1.0):
        rng = random.Random(77)
        for _ in range(50):
            capacity = rng.uniform(300, 2000)
            idle = rng.uniform(1.0, 40.0)
            per_request = rng.uniform(0.1, 4.0)
            model = BatteryModel(capacity_mah=capacity, idle_draw_ma=idle,
                                 per_request_mah=per_request)
            curve = [predict_lifetime(model, d) for d in range(1, 61)]
            assert all(b >= a for a, b in zip(curve, curve[1:])), \
                (capacity, idle, per_request)


@pytest.mark.parametrize("interval_min,target,duration_min", [
    (1, 715.0, 950),
    (20, 3637.0, 4300),
])
def test_simulated_depletion_matches_measured_lifetime(tmp_path, interval_min,
                                                       target, duration_min):
    """A stationary virtual locator on an unwindowed interval schedule
    depletes within 5% of the measured lifetime."""
    name = f"simulated depletion at {interval_min}-min interval ~ {target} min"
    with criterion(name, budget_s=30.0):
        config = stationary_config(every_s=interval_min * 60,
                                   duration_min=duration_min)
        result = run_scenario(config, tmp_path / f"run-{interval_min}")
        depleted = result.summary["depletion_min"]["car-0"]
        assert depleted is not None, "locator never depleted inside the scenario"
        assert abs(depleted - target) / target <= 0.05, \
            f"depleted at {depleted} min, target {target} +/- 5%"


def test_accuracy_quantiles_match_measured_distribution():
    """100,000 stationary simulated fixes: 75.6% +/- 2% within 5 m and
    93.1% +/- 2% within 10 m of the true position."""
    with criterion("accuracy quantiles 0.756@5m / 0.931@10m (n=100k)", budget_s=10.0):
        locator = build_locator(
            {"label": "car", "route": [{"lat": 5.41, "lon": 118.037}],
             "battery_capacity_mah": 10_000_000.0,
             "fix_success_prob": 1.0, "incomplete_prob": 0.0},
            DEFAULT_START)
        locator.last_update = DEFAULT_START
        rng = random.Random(314159)
        m_per_deg_lat = 111_320.0
        m_per_deg_lon = 111_320.0 * math.cos(math.radians(5.41))

        n = 100_000
        within5 = within10 = 0
        now = DEFAULT_START
        for _ in range(n):
            now += timedelta(seconds=60)
            _, body = locator.handle_locate("smslink123456", now, rng)
            msg = parse_tracker_response(body)
            assert msg.kind is MessageKind.FIX
            dx = (msg.longitude - 118.037) * m_per_deg_lon
            dy = (msg.latitude - 5.41) * m_per_deg_lat
            radius = math.hypot(dx, dy)
            within5 += radius <= 5.0
            within10 += radius <= 10.0
        p5, p10 = within5 / n, within10 / n
        assert abs(p5 - 0.756) <= 0.02, f"P(err<=5m) = {p5:.4f}"
        assert abs(p10 - 0.931) <= 0.02, f"P(err<=10m) = {p10:.4f}"


def test_latency_mean_inside_measured_band():
    """Mean of 10,000 simulated response latencies lies in [30.5, 42.8] s."""
    with criterion("mean simulated latency in [30.5, 42.8] s (n=10k)", budget_s=5.0):
        model = LatencyModel()
        rng = random.Random(2718)
        samples = [model.sample(rng) for _ in range(10_000)]
        mean = sum(samples) / len(samples)
        assert 30.5 <= mean <= 42.8, f"mean latency {mean:.2f} s"
        assert all(10.0 <= s <= 170.0 for s in samples)


def test_codec_round_trip_and_degraded_classification():
    """1,000 randomized Fix/LastKnownFix bodies survive parse(format(m)) = m;
    maps-only bodies classify as Incomplete."""
    with criterion("codec round-trip (n=1000) + maps-only classification",
                   budget_s=1.0):
        rng = random.Random(1618)
        for i in range(1000):
            original = random_fix(rng, stale=(i % 2 == 0))
            parsed = parse_tracker_response(format_tracker_response(original))
            assert parsed.kind is original.kind
            assert parsed.latitude == original.latitude
            assert parsed.longitude == original.longitude
            assert parsed.speed_kmh == original.speed_kmh
            assert parsed.battery_percent == original.battery_percent
            assert parsed.imei == original.imei
            assert parsed.maps_url == original.maps_url
        for _ in range(100):
            lat = round(rng.uniform(-90, 90), 6)
            lon = round(rng.uniform(-180, 180), 6)
            body = f"http://maps.google.com/maps?q={lat:.6f},{lon:.6f}"
            msg = parse_tracker_response(body)
            assert msg.kind is MessageKind.INCOMPLETE
            assert msg.latitude == pytest.approx(lat)


def test_cron_next_fire_agrees_with_minute_scan():
    """100 randomized valid cron expressions agree with a brute-force scan
    over a 1-year horizon on every next_fire call made."""
    with criterion("cron vs brute-force scan, 100 random expressions over 1 year",
                   budget_s=30.0):
        rng = random.Random(5150)
        start = datetime(2024, 1, 1, 0, 0)
        horizon = datetime(2025, 1, 1, 0, 0)
        for _ in range(100):
            expr = random_cron_expr(rng)
            spec = parse_cron(expr)

            # chase the chain of fires from the horizon start
            after = start
            oracle = enumerate_cron_instants(
                spec, start + timedelta(minutes=1), horizon)
            for expected in itertools.islice(oracle, 700):
                got = next_fire(spec, after.replace(tzinfo=timezone.utc))
                assert got == expected.replace(tzinfo=timezone.utc), \
                    f"{expr}: after {after} expected {expected}, got {got}"
                after = expected

            # and probe arbitrary instants inside the year
            for _ in range(10):
                probe = start + timedelta(minutes=rng.randrange(0, 525_600))
                expected = cron_next_brute(spec, probe, horizon)
                if expected is None:
                    continue
                got = next_fire(spec, probe.replace(tzinfo=timezone.utc))
                assert got == expected.replace(tzinfo=timezone.utc), \
                    f"{expr}: probe {probe}"


def test_window_correctness_over_two_simulated_weeks(tmp_path):
    """A weekend 14:00-19:00 hourly schedule over 14 simulated days emits
    requests only inside the window, exactly estimate_request_count of them."""
    with criterion("activation window: fires only inside window, count exact",
                   budget_s=10.0):
        window = {"start": "14:00", "end": "19:00", "days": ["sat", "sun"]}
        config = ScenarioConfig.from_dict({
            "seed": 99,
            "duration_min": 14 * 24 * 60,
            "locators": [{"label": "car-0",
                          "route": [{"lat": 5.41, "lon": 118.037}]}],
            "schedules": [{"kind": "cron", "cron": "0 14-18 * * 6,0",
                           "target": {"device": "car-0"}, "window": window}],
        })
        result = run_scenario(config, tmp_path / "window-run")

        sent_times = []
        for line in result.event_log_path.read_text().splitlines():
            record = json.loads(line)
            if record["type"] == "sms-sent":
                sent_times.append(datetime.fromisoformat(record["t"]))
        assert sent_times, "no requests were sent at all"

        win = ActivationWindow(start="14:00", end="19:00", days=frozenset({5, 6}))
        for t in sent_times:
            assert window_contains(win, t), f"request outside window at {t}"

        schedule = Schedule(schedule_id="s", kind="cron", target_kind="device",
                            target_id="d", starts_at=config.start,
                            cron_expr="0 14-18 * * 6,0", window=win)
        expected = estimate_request_count(schedule, timedelta(days=14))
        assert len(sent_times) == expected, \
            f"sent {len(sent_times)}, estimate_request_count says {expected}"
        assert expected == 20  # 5 hourly fires x 2 days x 2 weekends


def test_end_to_end_fleet_run_with_recovery(tmp_path):
    """5 virtual locators on a group interval schedule: every completed job
    has a persisted position, /fleet/status reflects last fixes, the GeoJSON
    export is valid, and an unclean mid-run stop loses no committed data."""
    with criterion("end-to-end fleet run + fleet/status + GeoJSON + recovery",
                   budget_s=60.0):
        config = stationary_config(every_s=600, duration_min=360, seed=31337, n=5)
        result = run_scenario(config, tmp_path / "full")

        # every completed job produced exactly one persisted position
        assert result.summary["jobs"]["completed"] > 100
        assert result.summary["positions"] == result.summary["jobs"]["completed"]
        store = Store(result.store_path)
        try:
            positions = store.scan("positions")
            assert len(positions) == result.summary["positions"]
            for pos in positions:
                source = store.get("messages", pos["source_message_id"])
                assert source is not None and source["direction"] == "in"
        finally:
            store.close()

        # serve the finished store over the HTTP control plane
        runtime = ServerRuntime(ServerConfig(store_path=str(result.store_path)))
        app = create_app(runtime)
        with TestClient(app) as client:
            status = client.get("/fleet/status").json()
            assert len(status["devices"]) == 5
            for entry in status["devices"]:
                assert entry["last_position"] is not None
                assert entry["last_latency_s"] is not None
                last = runtime.pipeline.last_position(entry["device_id"])
                assert entry["last_position"]["position_id"] == last.position_id

            doc = client.get(
                f"/devices/{status['devices'][0]['device_id']}/track",
                params={"from": "2024-01-01T00:00:00Z",
                        "to": "2024-01-02T00:00:00Z", "format": "geojson"}).json()
            assert doc["type"] == "FeatureCollection"
            assert doc["features"], "geojson export is empty"
            for feature in doc["features"]:
                assert feature["type"] == "Feature"
                geometry = feature["geometry"]
                assert geometry["type"] in ("LineString", "Point")
                coords = geometry["coordinates"]
                flat = coords if geometry["type"] == "Point" else coords
                if geometry["type"] == "Point":
                    flat = [coords]
                for lon, lat in flat:
                    assert -180 <= lon <= 180 and -90 <= lat <= 90
            line = next(f for f in doc["features"]
                        if f["geometry"]["type"] == "LineString")
            assert len(line["geometry"]["coordinates"]) >= 2

        # kill-and-recover: stop the same scenario mid-run without closing
        crashed = run_scenario(stationary_config(every_s=600, duration_min=360,
                                                 seed=31337, n=5),
                               tmp_path / "crash", crash_at=timedelta(minutes=180))
        assert crashed.crashed
        committed = 0
        for line in crashed.event_log_path.read_text().splitlines():
            record = json.loads(line)
            if record["type"] == "position-ingested":
                committed += 1
        recovered = Store(crashed.store_path)
        try:
            assert recovered.count("positions") == committed, \
                "committed positions lost across the unclean stop"
        finally:
            recovered.close()
        assert committed > 40


def test_duplicate_suppression_property(tmp_path):
    """Randomized dispatch/respond/timeout traces never exceed one
    outstanding job per device."""
    with criterion("duplicate suppression under randomized traces", budget_s=10.0):
        harness = Harness(tmp_path, timeout_s=180)
        devices = [harness.add_device(imei=f"3597100498877{i:02d}",
                                      phone=f"+60123456{i:03d}", label=f"car-{i}")
                   for i in range(6)]
        rng = random.Random(8086)
        now = datetime(2024, 1, 1, tzinfo=timezone.utc)
        body = ("lat:5.410000 lon:118.037000 speed:0.0 bat:70% id:359710049887700 "
                "http://maps.google.com/maps?q=5.410000,118.037000")
        attempts = successes = 0
        for _ in range(3000):
            now += timedelta(seconds=rng.randint(1, 30))
            device = rng.choice(devices)
            roll = rng.random()
            if roll < 0.5:
                attempts += 1
                try:
                    harness.gateway.dispatch_locate(device.device_id, now)
                    successes += 1
                except DuplicateOutstanding:
                    pass
            elif roll < 0.8:
                harness.gateway.on_inbound(InboundSms(
                    sender=device.phone_number, body=body, received_at=now))
            else:
                harness.gateway.expire_timeouts(now)
            for d in devices:
                job = harness.gateway.outstanding_job(d.device_id)
                assert job is None or job.state == "sent"
            outstanding_counts = [
                1 if harness.gateway.has_outstanding(d.device_id) else 0
                for d in devices]
            assert max(outstanding_counts) <= 1
        assert attempts > successes, "trace never hit the suppression path"
        harness.store.close()
