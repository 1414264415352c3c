import json
import math
import random
from datetime import timedelta

import pytest

from smstrack.energy import predict_lifetime, reference_model
from smstrack.errors import ConfigError
from smstrack.noise import (
    LatencyModel,
    RadialErrorModel,
    calibrate_error_mixture,
    default_error_model,
    offset_position,
    sample_radial_error,
)
from smstrack.simulator import (
    DEFAULT_START,
    Route,
    ScenarioConfig,
    VirtualLocator,
    Waypoint,
    build_locator,
    run_scenario,
)


def stationary_scenario(every_s=60, duration_min=900, seed=7, n=1, **locator_extra):
    return ScenarioConfig.from_dict({
        "seed": seed,
        "duration_min": duration_min,
        "locators": [
            {"label": f"car-{i}", "route": [{"lat": 5.41, "lon": 118.037}],
             **locator_extra}
            for i in range(n)],
        "groups": [{"name": "fleet", "members": [f"car-{i}" for i in range(n)]}],
        "schedules": [{"kind": "interval", "every_s": every_s,
                       "target": {"group": "fleet"}}],
    })


class TestErrorMixture:
    def test_calibration_hits_both_quantiles(self):
        model = calibrate_error_mixture()
        assert model.cdf(5.0) == pytest.approx(0.756, abs=1e-9)
        assert model.cdf(10.0) == pytest.approx(0.931, abs=1e-9)
        assert 0 < model.near_weight < 1
        assert model.sigma_near_m < model.sigma_far_m

    def test_single_rayleigh_cannot_hit_both(self):
        # fitting one sigma to the 5 m quantile overshoots the 10 m one
        sigma = 5.0 / math.sqrt(-2.0 * math.log(1.0 - 0.756))
        p10 = 1.0 - math.exp(-100.0 / (2 * sigma * sigma))
        assert p10 > 0.99

    def test_sampled_quantiles_match_cdf(self):
        model = default_error_model()
        rng = random.Random(42)
        n = 20000
        within5 = within10 = 0
        for _ in range(n):
            dx, dy = sample_radial_error(model, rng)
            r = math.hypot(dx, dy)
            within5 += r <= 5.0
            within10 += r <= 10.0
        assert within5 / n == pytest.approx(0.756, abs=0.02)
        assert within10 / n == pytest.approx(0.931, abs=0.02)

    def test_zero_sigma_gives_zero_radius(self):
        model = RadialErrorModel(sigma_near_m=0.0, sigma_far_m=0.0, near_weight=0.5)
        rng = random.Random(1)
        for _ in range(100):
            dx, dy = sample_radial_error(model, rng)
            assert dx == 0.0 and dy == 0.0

    def test_offset_position_meters_to_degrees(self):
        lat, lon = offset_position(0.0, 0.0, 111_320.0 * 0.001, 0.0)
        assert lon == pytest.approx(0.001)
        lat2, _ = offset_position(0.0, 0.0, 0.0, 111_320.0 * 0.001)
        assert lat2 == pytest.approx(0.001)


class TestLatencyModel:
    def test_sample_mean_in_measured_band(self):
        model = LatencyModel()
        rng = random.Random(5)
        samples = [model.sample(rng) for _ in range(10000)]
        mean = sum(samples) / len(samples)
        assert 30.5 <= mean <= 42.8

    def test_samples_clamped(self):
        model = LatencyModel(mean_s=36.6, spread_s=200.0)
        rng = random.Random(5)
        for _ in range(1000):
            s = model.sample(rng)
            assert 10.0 <= s <= 170.0


class TestRoute:
    def test_stationary(self):
        route = Route([Waypoint(5.41, 118.037)], DEFAULT_START)
        lat, lon, speed = route.state_at(DEFAULT_START + timedelta(hours=4))
        assert (lat, lon, speed) == (5.41, 118.037, 0.0)

    def test_linear_leg_midpoint(self):
        # ~1.113 km north at 40 km/h -> 100.17 s
        route = Route([Waypoint(5.0, 118.0, speed_kmh=40.0), Waypoint(5.01, 118.0)],
                      DEFAULT_START)
        leg_s = (0.01 * 111_320.0) / (40.0 / 3.6)
        lat, lon, speed = route.state_at(DEFAULT_START + timedelta(seconds=leg_s / 2))
        assert lat == pytest.approx(5.005, abs=1e-6)
        assert speed == 40.0
        lat_end, _, speed_end = route.state_at(DEFAULT_START + timedelta(seconds=leg_s + 1))
        assert lat_end == 5.01
        assert speed_end == 0.0

    def test_dwell_then_move(self):
        route = Route([Waypoint(5.0, 118.0, speed_kmh=36.0, dwell_s=600),
                       Waypoint(5.01, 118.0)], DEFAULT_START)
        lat, _, speed = route.state_at(DEFAULT_START + timedelta(seconds=300))
        assert lat == 5.0 and speed == 0.0


class TestVirtualLocator:
    def make(self, **kw):
        spec = {"label": "car", "route": [{"lat": 5.41, "lon": 118.037}], **kw}
        locator = build_locator(spec, DEFAULT_START)
        locator.last_update = DEFAULT_START
        return locator

    def test_perfect_fix_hits_true_position(self):
        locator = self.make(fix_success_prob=1.0, incomplete_prob=0.0,
                            error={"sigma_near_m": 0.0, "sigma_far_m": 0.0,
                                   "near_weight": 1.0})
        latency, body = locator.handle_locate("smslink123456", DEFAULT_START,
                                              random.Random(1))
        assert "lat:5.410000" in body and "lon:118.037000" in body
        assert body.startswith("lat:")

    def test_failed_fix_returns_last_known(self):
        locator = self.make(fix_success_prob=0.0, incomplete_prob=0.0)
        _, body = locator.handle_locate("smslink123456", DEFAULT_START,
                                        random.Random(1))
        assert body.startswith("LAST ")
        assert "lat:5.410000" in body  # power-on cache at route start

    def test_wrong_password_is_silence(self):
        locator = self.make()
        assert locator.handle_locate("smslink999999", DEFAULT_START,
                                     random.Random(1)) is None

    def test_depleted_locator_is_silent(self):
        locator = self.make(battery_start_mah=0.5)
        out = locator.handle_locate("smslink123456", DEFAULT_START, random.Random(1))
        assert out is None
        assert locator.depleted_at is not None

    def test_incomplete_probability_yields_maps_only(self):
        locator = self.make(fix_success_prob=1.0, incomplete_prob=1.0)
        _, body = locator.handle_locate("smslink123456", DEFAULT_START,
                                        random.Random(1))
        assert body.startswith("http://maps.google.com/maps?q=")


class TestScenarioConfig:
    def test_missing_locators_rejected(self):
        with pytest.raises(ConfigError) as err:
            ScenarioConfig.from_dict({"duration_min": 10})
        assert "locators" in str(err.value)

    def test_unknown_group_member_rejected(self):
        with pytest.raises(ConfigError) as err:
            ScenarioConfig.from_dict({
                "duration_min": 10,
                "locators": [{"label": "a", "route": [{"lat": 0, "lon": 0}]}],
                "groups": [{"name": "g", "members": ["nope"]}],
            })
        assert "members" in err.value.location

    def test_bad_schedule_target_rejected(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({
                "duration_min": 10,
                "locators": [{"label": "a", "route": [{"lat": 0, "lon": 0}]}],
                "schedules": [{"kind": "interval", "every_s": 60,
                               "target": {"device": "nope"}}],
            })

    def test_route_needs_coordinates(self):
        with pytest.raises(ConfigError) as err:
            ScenarioConfig.from_dict({
                "duration_min": 10,
                "locators": [{"label": "a", "route": [{"lat": 0}]}],
            })
        assert "route[0]" in err.value.location


class TestRunScenario:
    def test_same_seed_gives_byte_identical_logs(self, tmp_path):
        config = stationary_scenario(every_s=300, duration_min=120)
        r1 = run_scenario(config, tmp_path / "a")
        r2 = run_scenario(stationary_scenario(every_s=300, duration_min=120),
                          tmp_path / "b")
        assert r1.event_log_path.read_bytes() == r2.event_log_path.read_bytes()
        assert r1.summary == r2.summary

    def test_different_seed_differs(self, tmp_path):
        r1 = run_scenario(stationary_scenario(every_s=300, duration_min=120, seed=1),
                          tmp_path / "a")
        r2 = run_scenario(stationary_scenario(every_s=300, duration_min=120, seed=2),
                          tmp_path / "b")
        assert r1.event_log_path.read_bytes() != r2.event_log_path.read_bytes()

    def test_depletion_matches_energy_model_within_5pct(self, tmp_path):
        config = stationary_scenario(every_s=600, duration_min=6000)
        result = run_scenario(config, tmp_path / "run")
        predicted = predict_lifetime(reference_model(), 10)
        got = result.summary["depletion_min"]["car-0"]
        assert got is not None
        assert abs(got - predicted) / predicted < 0.05

    def test_positions_accumulate_and_latencies_recorded(self, tmp_path):
        config = stationary_scenario(every_s=300, duration_min=60)
        result = run_scenario(config, tmp_path / "run")
        assert result.summary["positions"] >= 10
        assert result.summary["latency"]["count"] >= 10
        assert 10 <= result.summary["latency"]["mean_s"] <= 170

    def test_event_log_is_replayable_json(self, tmp_path):
        config = stationary_scenario(every_s=300, duration_min=60)
        result = run_scenario(config, tmp_path / "run")
        seqs = []
        for line in result.event_log_path.read_text().splitlines():
            record = json.loads(line)
            seqs.append(record["seq"])
            assert "t" in record and "type" in record
        assert seqs == sorted(seqs)
        assert seqs[0] == 1
