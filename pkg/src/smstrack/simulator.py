"""Deterministic virtual locator fleet.

Drives the real scheduler/gateway/pipeline stack through an in-memory SMS
network on a virtual clock: seeded randomness only, events ordered by
(virtual time, sequence), so identical (config, seed) produce a
byte-identical event log.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional
from zoneinfo import ZoneInfo

from .codec import MessageKind, TrackerMessage, canonical_maps_url, format_tracker_response
from .energy import BatteryModel, reference_model
from .errors import ConfigError
from .gateway import InboundSms, OutboundSms, SmsGateway
from .noise import (
    LatencyModel,
    RadialErrorModel,
    default_error_model,
    offset_position,
    sample_radial_error,
)
from .pipeline import PositionPipeline
from .registry import DeviceRegistry
from .scheduling import (
    ActivationWindow,
    Schedule,
    Scheduler,
    WEEKDAY_NAMES,
    schedule_to_record,
)
from .store import Store
from .timeutil import format_ts, parse_ts

DEFAULT_START = datetime(2024, 1, 1, tzinfo=timezone.utc)
DEFAULT_FIX_SUCCESS_PROB = 0.95   # town-grade GPS; jungle deployments cite 58.1%
DEFAULT_INCOMPLETE_PROB = 0.02    # occasional maps-only degraded replies
METERS_PER_DEG = 111_320.0


# -- movement ------------------------------------------------------------------

@dataclass(frozen=True)
class Waypoint:
    lat: float
    lon: float
    speed_kmh: float = 0.0   # speed of the leg leaving this waypoint
    dwell_s: float = 0.0     # pause at this waypoint before moving on


class Route:
    """Piecewise-linear path; position is a pure function of elapsed time."""

    def __init__(self, waypoints: list[Waypoint], start: datetime):
        self._start = start
        self._segments: list[tuple[float, float, Waypoint, Waypoint, float]] = []
        t = 0.0
        for i, wp in enumerate(waypoints):
            if wp.dwell_s > 0:
                self._segments.append((t, t + wp.dwell_s, wp, wp, 0.0))
                t += wp.dwell_s
            if i + 1 < len(waypoints):
                nxt = waypoints[i + 1]
                dist_m = _equirect_m(wp.lat, wp.lon, nxt.lat, nxt.lon)
                speed = max(wp.speed_kmh, 0.0)
                if dist_m > 0 and speed > 0:
                    duration = dist_m / (speed / 3.6)
                    self._segments.append((t, t + duration, wp, nxt, speed))
                    t += duration
                # zero-speed legs collapse: the locator just appears at the
                # next waypoint (treat as instantaneous teleport between dwells)
        self._final = waypoints[-1]
        self._first = waypoints[0]

    def state_at(self, now: datetime) -> tuple[float, float, float]:
        """(lat, lon, speed_kmh) at the given instant."""
        elapsed = (now - self._start).total_seconds()
        if elapsed <= 0 or not self._segments:
            return (self._first.lat, self._first.lon, 0.0)
        for t0, t1, a, b, speed in self._segments:
            if elapsed < t1:
                if t1 == t0 or a is b:
                    return (a.lat, a.lon, 0.0)
                frac = (elapsed - t0) / (t1 - t0)
                return (a.lat + (b.lat - a.lat) * frac,
                        a.lon + (b.lon - a.lon) * frac,
                        speed)
        return (self._final.lat, self._final.lon, 0.0)


def _equirect_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    mid = math.radians((lat1 + lat2) / 2.0)
    dx = (lon2 - lon1) * METERS_PER_DEG * math.cos(mid)
    dy = (lat2 - lat1) * METERS_PER_DEG
    return math.hypot(dx, dy)


# -- virtual locator -----------------------------------------------------------

@dataclass
class VirtualLocator:
    label: str
    imei: str
    phone_number: str
    password: str
    route: Route
    battery: BatteryModel
    remaining_mah: float
    fix_success_prob: float = DEFAULT_FIX_SUCCESS_PROB
    incomplete_prob: float = DEFAULT_INCOMPLETE_PROB
    latency_model: LatencyModel = field(default_factory=LatencyModel)
    error_model: RadialErrorModel = field(default_factory=default_error_model)
    last_update: Optional[datetime] = None
    depleted_at: Optional[datetime] = None
    last_fix: Optional[tuple[float, float]] = None
    device_id: Optional[str] = None

    def _drain_idle(self, now: datetime) -> None:
        if self.last_update is None:
            self.last_update = now
            return
        if self.depleted_at is not None:
            return
        minutes = (now - self.last_update).total_seconds() / 60.0
        self.last_update = now
        if minutes <= 0:
            return
        cost = minutes * self.battery.idle_mah_per_min
        if cost >= self.remaining_mah:
            survive_min = self.remaining_mah / self.battery.idle_mah_per_min
            self.depleted_at = now - timedelta(minutes=minutes - survive_min)
            self.remaining_mah = 0.0
        else:
            self.remaining_mah -= cost

    def battery_percent(self) -> int:
        return max(0, min(100, round(100.0 * self.remaining_mah / self.battery.capacity_mah)))

    def handle_locate(self, body: str, now: datetime,
                      rng: random.Random) -> Optional[tuple[float, str]]:
        """React to one inbound SMS; returns (latency_s, response_body) or
        None when the locator stays silent (dead battery, wrong password)."""
        self._drain_idle(now)
        if self.depleted_at is not None:
            return None
        if body != "smslink" + self.password:
            return None
        # the locate/response cycle costs a fixed charge; a locator that
        # cannot afford it dies mid-acquisition and never answers
        if self.remaining_mah <= self.battery.per_request_mah:
            self.remaining_mah = 0.0
            self.depleted_at = now
            return None
        self.remaining_mah -= self.battery.per_request_mah

        true_lat, true_lon, speed = self.route.state_at(now)
        got_fix = rng.random() < self.fix_success_prob
        incomplete = rng.random() < self.incomplete_prob

        if got_fix:
            east, north = sample_radial_error(self.error_model, rng)
            lat, lon = offset_position(true_lat, true_lon, east, north)
            lat, lon = round(lat, 6), round(lon, 6)
            self.last_fix = (lat, lon)
            kind = MessageKind.FIX
        else:
            if self.last_fix is None:
                # factory fix from power-on at the route start
                self.last_fix = (round(true_lat, 6), round(true_lon, 6))
            lat, lon = self.last_fix
            kind = MessageKind.LAST_KNOWN_FIX
            speed = 0.0

        latency = self.latency_model.sample(rng)
        if incomplete:
            return (latency, canonical_maps_url(lat, lon))
        msg = TrackerMessage(
            kind=kind,
            latitude=lat,
            longitude=lon,
            speed_kmh=round(speed, 1),
            battery_percent=self.battery_percent(),
            imei=self.imei,
        )
        return (latency, format_tracker_response(msg))

    def finalize(self, end: datetime) -> None:
        """Apply idle drain through the end of the scenario."""
        self._drain_idle(end)


# -- scenario configuration ------------------------------------------------------

@dataclass
class ScenarioConfig:
    seed: int
    start: datetime
    duration: timedelta
    clock_acceleration: float
    tick_s: float
    response_timeout_s: float
    timezone_name: str
    locators: list[dict]
    groups: list[dict]
    schedules: list[dict]
    defaults: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        def need(d: dict, key: str, loc: str):
            if key not in d:
                raise ConfigError(f"{loc}.{key}", "missing required key")
            return d[key]

        if not isinstance(raw, dict):
            raise ConfigError("$", "scenario must be a JSON object")
        seed = raw.get("seed", 0)
        if not isinstance(seed, int):
            raise ConfigError("seed", "must be an integer")
        try:
            start = parse_ts(raw["start"]) if "start" in raw else DEFAULT_START
        except ValueError:
            raise ConfigError("start", "must be an ISO-8601 timestamp") from None
        duration_min = raw.get("duration_min")
        if not isinstance(duration_min, (int, float)) or duration_min <= 0:
            raise ConfigError("duration_min", "must be a positive number of minutes")
        accel = raw.get("clock_acceleration", 60.0)
        if not isinstance(accel, (int, float)) or accel < 1:
            raise ConfigError("clock_acceleration", "must be a number >= 1")
        locators = raw.get("locators")
        if not isinstance(locators, list) or not locators:
            raise ConfigError("locators", "at least one locator is required")
        for i, loc in enumerate(locators):
            if not isinstance(loc, dict):
                raise ConfigError(f"locators[{i}]", "must be an object")
            need(loc, "label", f"locators[{i}]")
            route = need(loc, "route", f"locators[{i}]")
            if not isinstance(route, list) or not route:
                raise ConfigError(f"locators[{i}].route", "needs at least one waypoint")
            for j, wp in enumerate(route):
                if "lat" not in wp or "lon" not in wp:
                    raise ConfigError(f"locators[{i}].route[{j}]", "needs lat and lon")
        labels = [loc["label"] for loc in locators]
        if len(set(labels)) != len(labels):
            raise ConfigError("locators", "labels must be unique")
        groups = raw.get("groups", [])
        for i, grp in enumerate(groups):
            need(grp, "name", f"groups[{i}]")
            for member in grp.get("members", []):
                if member not in labels:
                    raise ConfigError(f"groups[{i}].members", f"unknown locator {member!r}")
        schedules = raw.get("schedules", [])
        group_names = [g["name"] for g in groups]
        for i, sch in enumerate(schedules):
            kind = need(sch, "kind", f"schedules[{i}]")
            if kind not in ("date", "interval", "cron"):
                raise ConfigError(f"schedules[{i}].kind", f"unknown kind {kind!r}")
            target = need(sch, "target", f"schedules[{i}]")
            if not isinstance(target, dict) or len(target) != 1 or \
                    next(iter(target)) not in ("device", "group"):
                raise ConfigError(f"schedules[{i}].target",
                                  'must be {"device": label} or {"group": name}')
            target_kind, name = next(iter(target.items()))
            pool = labels if target_kind == "device" else group_names
            if name not in pool:
                raise ConfigError(f"schedules[{i}].target", f"unknown {target_kind} {name!r}")
        return cls(
            seed=seed,
            start=start,
            duration=timedelta(minutes=float(duration_min)),
            clock_acceleration=float(accel),
            tick_s=float(raw.get("tick_s", 60.0)),
            response_timeout_s=float(raw.get("response_timeout_s", 180.0)),
            timezone_name=raw.get("timezone", "UTC"),
            locators=locators,
            groups=groups,
            schedules=schedules,
            defaults=raw.get("defaults", {}),
        )

    @classmethod
    def load(cls, path: str) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("$", f"invalid JSON: {exc}") from exc
        return cls.from_dict(raw)


def parse_window(raw: Optional[dict], location: str = "window") -> Optional[ActivationWindow]:
    if raw is None:
        return None
    try:
        days = frozenset(WEEKDAY_NAMES.index(d.lower()) for d in raw.get("days", []))
    except ValueError:
        raise ConfigError(f"{location}.days",
                          f"day names must be one of {', '.join(WEEKDAY_NAMES)}") from None
    return ActivationWindow(
        start=raw.get("start", "00:00"),
        end=raw.get("end", "24:00"),
        days=days,
        timezone_name=raw.get("timezone"),
    )


def build_locator(spec: dict, start: datetime, defaults: Optional[dict] = None,
                  index: int = 0) -> VirtualLocator:
    defaults = defaults or {}

    def pick(key, fallback):
        return spec.get(key, defaults.get(key, fallback))

    capacity = float(pick("battery_capacity_mah", 850.0))
    battery_spec = pick("battery", None)
    if battery_spec:
        battery = BatteryModel(capacity_mah=capacity,
                               idle_draw_ma=float(battery_spec["idle_draw_ma"]),
                               per_request_mah=float(battery_spec["per_request_mah"]))
    else:
        ref = reference_model()
        battery = BatteryModel(capacity_mah=capacity,
                               idle_draw_ma=ref.idle_draw_ma,
                               per_request_mah=ref.per_request_mah)
    latency_spec = pick("latency", None)
    latency = LatencyModel(
        mean_s=float(latency_spec["mean_s"]),
        spread_s=float(latency_spec.get("spread_s", 10.0)),
        min_s=float(latency_spec.get("min_s", 10.0)),
        max_s=float(latency_spec.get("max_s", 170.0)),
    ) if latency_spec else LatencyModel()
    error_spec = pick("error", None)
    error = RadialErrorModel(
        sigma_near_m=float(error_spec["sigma_near_m"]),
        sigma_far_m=float(error_spec["sigma_far_m"]),
        near_weight=float(error_spec.get("near_weight", 1.0)),
    ) if error_spec else default_error_model()

    waypoints = [Waypoint(lat=float(wp["lat"]), lon=float(wp["lon"]),
                          speed_kmh=float(wp.get("speed_kmh", 0.0)),
                          dwell_s=float(wp.get("dwell_s", 0.0)))
                 for wp in spec["route"]]
    return VirtualLocator(
        label=spec["label"],
        imei=spec.get("imei", f"{350000000000000 + index:015d}"),
        phone_number=spec.get("phone_number", f"+60100000{index:04d}"),
        password=spec.get("password", "123456"),
        route=Route(waypoints, start),
        battery=battery,
        remaining_mah=float(spec.get("battery_start_mah", capacity)),
        fix_success_prob=float(pick("fix_success_prob", DEFAULT_FIX_SUCCESS_PROB)),
        incomplete_prob=float(pick("incomplete_prob", DEFAULT_INCOMPLETE_PROB)),
        latency_model=latency,
        error_model=error,
    )


# -- discrete-event engine --------------------------------------------------------

class _SimTransport:
    """Routes gateway sends straight into the virtual fleet."""

    def __init__(self, engine: "ScenarioEngine"):
        self._engine = engine

    def send(self, sms: OutboundSms) -> None:
        self._engine.handle_send(sms)

    def poll(self) -> list[InboundSms]:
        return []  # deliveries arrive as engine events, not via polling


@dataclass
class ScenarioResult:
    out_dir: Path
    store_path: Path
    event_log_path: Path
    summary: dict
    crashed: bool = False


class ScenarioEngine:
    def __init__(self, config: ScenarioConfig, out_dir: str | Path):
        self.config = config
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.rng = random.Random(config.seed)
        self.now = config.start
        self.end = config.start + config.duration
        self._heap: list[tuple[datetime, int, str, object]] = []
        self._push_seq = 0
        self._log_seq = 0
        self._latencies: list[float] = []
        self._jobs = {"completed": 0, "timed_out": 0, "dispatched": 0}
        self._positions = 0

        self.store = Store(self.out_dir / "store", fsync=False)
        self.registry = DeviceRegistry(allocate_id=self.store.next_id)
        self.pipeline = PositionPipeline(self.store, self.registry)
        transport = _SimTransport(self)
        self.gateway = SmsGateway(self.registry, self.store, self.pipeline, transport,
                                  timeout_s=config.response_timeout_s,
                                  on_event=self._on_gateway_event)
        try:
            default_tz = ZoneInfo(config.timezone_name)
        except Exception:
            raise ConfigError("timezone", f"unknown zone {config.timezone_name!r}") from None
        self.scheduler = Scheduler(self.registry.resolve_targets, default_tz=default_tz)

        self._event_log_path = self.out_dir / "events.jsonl"
        self._event_fh = open(self._event_log_path, "w", encoding="utf-8")

        self.locators: dict[str, VirtualLocator] = {}
        self._by_phone: dict[str, VirtualLocator] = {}
        self._build_fleet()

    def _build_fleet(self) -> None:
        defaults = self.config.defaults
        label_to_device: dict[str, str] = {}
        for i, spec in enumerate(self.config.locators):
            locator = build_locator(spec, self.config.start, defaults, index=i)
            with self.store.transaction():
                device = self.registry.register_device(
                    imei=locator.imei, phone_number=locator.phone_number,
                    password=locator.password,
                    battery_capacity_mah=locator.battery.capacity_mah,
                    label=locator.label)
                self.store.put("devices", device.device_id, device.to_record())
            locator.device_id = device.device_id
            locator.last_update = self.config.start
            self.locators[locator.label] = locator
            self._by_phone[locator.phone_number] = locator
            label_to_device[locator.label] = device.device_id
        name_to_group: dict[str, str] = {}
        for grp in self.config.groups:
            with self.store.transaction():
                group = self.registry.create_group(
                    name=grp["name"],
                    member_device_ids=[label_to_device[m]
                                       for m in grp.get("members", [])])
                self.store.put("groups", group.group_id, group.to_record())
            name_to_group[grp["name"]] = group.group_id
        for i, sch in enumerate(self.config.schedules):
            target_kind, name = next(iter(sch["target"].items()))
            target_id = label_to_device[name] if target_kind == "device" \
                else name_to_group[name]
            with self.store.transaction():
                schedule = Schedule(
                    schedule_id=self.store.next_id("sch"),
                    kind=sch["kind"],
                    target_kind=target_kind,
                    target_id=target_id,
                    starts_at=self.config.start,
                    at=parse_ts(sch["at"]) if sch.get("at") else None,
                    every_s=int(sch["every_s"]) if sch.get("every_s") else None,
                    cron_expr=sch.get("cron"),
                    window=parse_window(sch.get("window"), f"schedules[{i}].window"),
                    enabled=bool(sch.get("enabled", True)),
                )
                try:
                    schedule.validate()
                except Exception as exc:
                    raise ConfigError(f"schedules[{i}]", str(exc)) from exc
                self.store.put("schedules", schedule.schedule_id,
                               schedule_to_record(schedule))
            self.scheduler.add(schedule)

    # -- engine internals ------------------------------------------------------

    def _push(self, at: datetime, kind: str, payload: object = None) -> None:
        self._push_seq += 1
        heapq.heappush(self._heap, (at, self._push_seq, kind, payload))

    def log(self, event_type: str, data: dict) -> None:
        self._log_seq += 1
        record = {"seq": self._log_seq, "t": format_ts(self.now),
                  "type": event_type, **data}
        self._event_fh.write(json.dumps(record, sort_keys=True,
                                        separators=(",", ":")) + "\n")

    def _on_gateway_event(self, kind: str, data: dict) -> None:
        self.log(kind, data)
        if kind == "job-state-changed":
            state = data["job"]["state"]
            if state == "completed":
                self._jobs["completed"] += 1
                self._latencies.append(data["job"]["latency_s"])
            elif state == "timed_out":
                self._jobs["timed_out"] += 1
            elif state == "sent":
                self._jobs["dispatched"] += 1
        elif kind == "position-ingested":
            self._positions += 1

    def handle_send(self, sms: OutboundSms) -> None:
        self.log("sms-sent", {"to": sms.to, "body": sms.body})
        locator = self._by_phone.get(sms.to)
        if locator is None:
            return
        was_alive = locator.depleted_at is None
        response = locator.handle_locate(sms.body, self.now, self.rng)
        if locator.depleted_at is not None and was_alive:
            self.log("locator-depleted", {
                "label": locator.label,
                "depleted_at": format_ts(locator.depleted_at),
                "minutes": round((locator.depleted_at - self.config.start)
                                 .total_seconds() / 60.0, 3)})
        if response is None:
            return
        latency_s, body = response
        deliver_at = self.now + timedelta(seconds=latency_s)
        self._push(deliver_at, "delivery",
                   InboundSms(sender=locator.phone_number, body=body,
                              received_at=deliver_at))

    def _handle_tick(self) -> None:
        self.gateway.expire_timeouts(self.now)
        jobs = self.scheduler.due_jobs(self.now, self.gateway.has_outstanding)
        by_schedule: dict[str, list[str]] = {}
        for job in jobs:
            by_schedule.setdefault(job.schedule_id, []).append(job.device_id)
        for schedule_id, device_ids in by_schedule.items():
            self.log("schedule-fired", {"schedule_id": schedule_id,
                                        "devices": device_ids})
        dispatched: set[str] = set()
        for job in jobs:
            if job.device_id in dispatched:
                continue  # two schedules firing the same device in one tick
            self.gateway.dispatch_locate(job.device_id, self.now,
                                         schedule_id=job.schedule_id,
                                         fire_at=job.fire_at)
            dispatched.add(job.device_id)

    def run(self, crash_at: Optional[timedelta] = None) -> ScenarioResult:
        crash_time = self.config.start + crash_at if crash_at else None
        self.log("scenario-started", {
            "seed": self.config.seed,
            "start": format_ts(self.config.start),
            "duration_min": self.config.duration.total_seconds() / 60.0,
            "locators": sorted(self.locators)})
        tick = timedelta(seconds=self.config.tick_s)
        t = self.config.start
        while t <= self.end:
            self._push(t, "tick")
            t += tick
        crashed = False
        while self._heap:
            at, _, kind, payload = heapq.heappop(self._heap)
            if at > self.end:
                break
            if crash_time is not None and at >= crash_time:
                crashed = True
                break
            self.now = at
            if kind == "tick":
                self._handle_tick()
            elif kind == "delivery":
                self.log("sms-received", {"from": payload.sender, "body": payload.body})
                self.gateway.on_inbound(payload)
        if crashed:
            # simulate a crash: drop everything on the floor, no close/compact
            self._event_fh.flush()
            return ScenarioResult(
                out_dir=self.out_dir, store_path=self.out_dir / "store",
                event_log_path=self._event_log_path,
                summary={"crashed_at": format_ts(crash_time)}, crashed=True)
        self.now = self.end
        for locator in self.locators.values():
            was_alive = locator.depleted_at is None
            locator.finalize(self.end)
            if locator.depleted_at is not None and was_alive:
                self.log("locator-depleted", {
                    "label": locator.label,
                    "depleted_at": format_ts(locator.depleted_at),
                    "minutes": round((locator.depleted_at - self.config.start)
                                     .total_seconds() / 60.0, 3)})
        summary = self._summary()
        self.log("scenario-finished", {"summary": summary})
        self._event_fh.close()
        self.store.close()
        summary_path = self.out_dir / "summary.json"
        summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                encoding="utf-8")
        return ScenarioResult(out_dir=self.out_dir, store_path=self.out_dir / "store",
                              event_log_path=self._event_log_path, summary=summary)

    def _summary(self) -> dict:
        depletion = {}
        for label, locator in sorted(self.locators.items()):
            if locator.depleted_at is not None:
                depletion[label] = round(
                    (locator.depleted_at - self.config.start).total_seconds() / 60.0, 3)
            else:
                depletion[label] = None
        lat = sorted(self._latencies)
        latency_stats = {
            "count": len(lat),
            "mean_s": round(sum(lat) / len(lat), 3) if lat else None,
            "min_s": round(lat[0], 3) if lat else None,
            "max_s": round(lat[-1], 3) if lat else None,
        }
        return {
            "depletion_min": depletion,
            "latency": latency_stats,
            "jobs": dict(self._jobs),
            "positions": self._positions,
            "battery_remaining_mah": {
                label: round(loc.remaining_mah, 3)
                for label, loc in sorted(self.locators.items())},
        }


def run_scenario(config: ScenarioConfig, out_dir: str | Path,
                 crash_at: Optional[timedelta] = None) -> ScenarioResult:
    engine = ScenarioEngine(config, out_dir)
    return engine.run(crash_at=crash_at)


# -- live fleet for a simulator-backed server ------------------------------------

class LiveFleetTransport:
    """TransportPort over the virtual fleet for a real (wall-clock) server.

    The runtime's virtual clock is injected; deliveries mature when the
    virtual clock passes their delivery instant.
    """

    def __init__(self, config: ScenarioConfig, clock):
        self._clock = clock
        self._rng = random.Random(config.seed)
        self._pending: list[tuple[datetime, int, InboundSms]] = []
        self._seq = 0
        self.locators: dict[str, VirtualLocator] = {}
        for i, spec in enumerate(config.locators):
            locator = build_locator(spec, config.start, index=i)
            locator.last_update = config.start
            self.locators[locator.phone_number] = locator

    def send(self, sms: OutboundSms) -> None:
        locator = self.locators.get(sms.to)
        if locator is None:
            return
        now = self._clock()
        response = locator.handle_locate(sms.body, now, self._rng)
        if response is None:
            return
        latency_s, body = response
        deliver_at = now + timedelta(seconds=latency_s)
        self._seq += 1
        heapq.heappush(self._pending,
                       (deliver_at, self._seq,
                        InboundSms(sender=sms.to, body=body, received_at=deliver_at)))

    def poll(self) -> list[InboundSms]:
        now = self._clock()
        ready = []
        while self._pending and self._pending[0][0] <= now:
            ready.append(heapq.heappop(self._pending)[2])
        return ready
