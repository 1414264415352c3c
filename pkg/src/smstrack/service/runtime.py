"""Composition root for the tracking server.

Owns the store, registry, scheduler, gateway and event feed, and runs the
serialized control loop (poll transport, expire timeouts, dispatch due
jobs). HTTP handlers call in through the same lock, so every mutation is
serialized with the loop.
"""

from __future__ import annotations

import logging
import threading
import time as _time
from datetime import datetime, timedelta
from typing import Optional
from zoneinfo import ZoneInfo

from ..energy import (
    BatteryModel,
    fit_battery_model,
    predict_lifetime,
    predict_lifetime_for_schedule,
    reference_model,
)
from ..errors import (
    DuplicateOutstanding,
    SmsTrackError,
    TransportUnavailable,
    UnknownDevice,
)
from ..events import EventBus
from ..gateway import HttpModemTransport, SmsGateway
from ..pipeline import PositionPipeline
from ..registry import DeviceRegistry, Device, Group
from ..scheduling import (
    Schedule,
    Scheduler,
    schedule_from_record,
    schedule_to_record,
)
from ..simulator import LiveFleetTransport, ScenarioConfig
from ..store import Store
from ..timeutil import format_ts, utc_now
from .auth import TokenAuth
from .config import ServerConfig

log = logging.getLogger("smstrack")

DEVICES_NS = "devices"
GROUPS_NS = "groups"
SCHEDULES_NS = "schedules"
MODELS_NS = "models"
BATTERY_MODEL_ID = "battery"


class NullTransport:
    """Configured when no SMS path exists; sends fail loudly, polls are empty."""

    def send(self, sms) -> None:
        raise TransportUnavailable("no SMS transport configured")

    def poll(self) -> list:
        return []


class ServerRuntime:
    def __init__(self, config: ServerConfig, transport=None, clock=None):
        self.config = config
        self.lock = threading.RLock()
        self.store = Store(config.store_path, fsync=(config.transport != "loopback"))
        self.registry = DeviceRegistry(allocate_id=self.store.next_id)
        self.pipeline = PositionPipeline(self.store, self.registry)
        try:
            self.default_tz = ZoneInfo(config.timezone)
        except Exception:
            raise SmsTrackError(f"unknown timezone {config.timezone!r}") from None
        self.scheduler = Scheduler(self.registry.resolve_targets,
                                   default_tz=self.default_tz)

        self._clock_override = clock
        self._virtual_anchor: Optional[tuple[datetime, float, float]] = None
        if transport is not None:
            self.transport = transport
        elif config.transport == "loopback":
            scenario = ScenarioConfig.load(config.scenario)
            self._virtual_anchor = (scenario.start, _time.monotonic(),
                                    config.clock_acceleration)
            self.transport = LiveFleetTransport(scenario, clock=self.now)
            self._seed_from_scenario(scenario)
        elif config.transport == "http":
            self.transport = HttpModemTransport(config.transport_url)
        else:
            self.transport = NullTransport()

        self.events = EventBus(clock=self.now)
        self.gateway = SmsGateway(
            self.registry, self.store, self.pipeline, self.transport,
            timeout_s=config.response_timeout_s,
            on_event=lambda kind, data: self.events.publish(kind, data))

        self.auth = TokenAuth.from_file(config.token_file) if config.token_file \
            else TokenAuth.open_access()

        self._load_state()
        self._loop_thread: Optional[threading.Thread] = None
        self._stop = threading.Event()

    # -- clock ---------------------------------------------------------------

    def now(self) -> datetime:
        if self._clock_override is not None:
            return self._clock_override()
        if self._virtual_anchor is not None:
            start, wall0, accel = self._virtual_anchor
            return start + timedelta(seconds=(_time.monotonic() - wall0) * accel)
        return utc_now()

    # -- startup -----------------------------------------------------------------

    def _load_state(self) -> None:
        for rec in self.store.scan(DEVICES_NS):
            device = Device.from_record(rec)
            self.registry.register_device(
                imei=device.imei, phone_number=device.phone_number,
                password=device.password,
                battery_capacity_mah=device.battery_capacity_mah,
                label=device.label, device_id=device.device_id)
        for rec in self.store.scan(GROUPS_NS):
            group = Group.from_record(rec)
            self.registry.create_group(name=group.name,
                                       member_device_ids=group.member_device_ids,
                                       group_id=group.group_id)
        now = self.now()
        for rec in self.store.scan(SCHEDULES_NS):
            # a restarted server resumes from now, skipping missed fires
            self.scheduler.replace(schedule_from_record(rec), effect_from=now)
        if self.store.get(MODELS_NS, BATTERY_MODEL_ID) is None:
            self.store.put(MODELS_NS, BATTERY_MODEL_ID, reference_model().to_dict())

    def _seed_from_scenario(self, scenario: ScenarioConfig) -> None:
        """First boot of a simulator-backed server: persist the scenario's
        fleet, groups and schedules as the initial configuration. The
        registry picks them up in _load_state."""
        if self.store.count(DEVICES_NS):
            return
        from ..simulator import parse_window

        label_to_device: dict[str, str] = {}
        name_to_group: dict[str, str] = {}
        with self.store.transaction():
            for locator in self.transport.locators.values():
                device = Device(
                    device_id=self.store.next_id("dev"),
                    imei=locator.imei, phone_number=locator.phone_number,
                    password=locator.password,
                    battery_capacity_mah=locator.battery.capacity_mah,
                    label=locator.label)
                self.store.put(DEVICES_NS, device.device_id, device.to_record())
                label_to_device[locator.label] = device.device_id
            for grp in scenario.groups:
                group = Group(group_id=self.store.next_id("grp"), name=grp["name"],
                              member_device_ids={label_to_device[m]
                                                 for m in grp.get("members", [])})
                self.store.put(GROUPS_NS, group.group_id, group.to_record())
                name_to_group[grp["name"]] = group.group_id
            for sch in scenario.schedules:
                target_kind, name = next(iter(sch["target"].items()))
                target_id = label_to_device[name] if target_kind == "device" \
                    else name_to_group[name]
                schedule = Schedule(
                    schedule_id=self.store.next_id("sch"),
                    kind=sch["kind"], target_kind=target_kind, target_id=target_id,
                    starts_at=scenario.start,
                    at=None, every_s=sch.get("every_s"),
                    cron_expr=sch.get("cron"),
                    window=parse_window(sch.get("window")),
                    enabled=bool(sch.get("enabled", True)))
                schedule.validate()
                self.store.put(SCHEDULES_NS, schedule.schedule_id,
                               schedule_to_record(schedule))

    # -- control loop ---------------------------------------------------------------

    def tick(self, now: Optional[datetime] = None) -> None:
        with self.lock:
            at = now if now is not None else self.now()
            try:
                for sms in self.transport.poll():
                    self.gateway.on_inbound(sms)
            except TransportUnavailable as exc:
                log.warning("transport poll failed: %s", exc)
            self.gateway.expire_timeouts(at)
            jobs = self.scheduler.due_jobs(at, self.gateway.has_outstanding)
            by_schedule: dict[str, list[str]] = {}
            for job in jobs:
                by_schedule.setdefault(job.schedule_id, []).append(job.device_id)
            for schedule_id, device_ids in by_schedule.items():
                self.events.publish("schedule-fired",
                                    {"schedule_id": schedule_id, "devices": device_ids})
            dispatched: set[str] = set()
            for job in jobs:
                if job.device_id in dispatched:
                    continue
                try:
                    self.gateway.dispatch_locate(job.device_id, at,
                                                 schedule_id=job.schedule_id,
                                                 fire_at=job.fire_at)
                    dispatched.add(job.device_id)
                except (TransportUnavailable, DuplicateOutstanding, UnknownDevice) as exc:
                    log.warning("dispatch for %s failed: %s", job.device_id, exc)

    def start_loop(self) -> None:
        if self._loop_thread is not None:
            return
        self._stop.clear()

        def run():
            while not self._stop.is_set():
                try:
                    self.tick()
                except Exception:
                    log.exception("control loop tick failed")
                self._stop.wait(self.config.tick_interval_s)

        self._loop_thread = threading.Thread(target=run, name="smstrack-loop",
                                             daemon=True)
        self._loop_thread.start()

    def stop_loop(self) -> None:
        self._stop.set()
        if self._loop_thread is not None:
            self._loop_thread.join(timeout=5)
            self._loop_thread = None

    def close(self) -> None:
        self.stop_loop()
        self.store.close()

    # -- devices ------------------------------------------------------------------

    def create_device(self, **kwargs) -> Device:
        with self.lock, self.store.transaction():
            device = self.registry.register_device(**kwargs)
            self.store.put(DEVICES_NS, device.device_id, device.to_record())
            return device

    def update_device(self, device_id: str, **changes) -> Device:
        with self.lock, self.store.transaction():
            device = self.registry.update_device(device_id, **changes)
            self.store.put(DEVICES_NS, device.device_id, device.to_record())
            return device

    def delete_device(self, device_id: str) -> None:
        with self.lock, self.store.transaction():
            self.registry.delete_device(device_id)
            self.store.delete(DEVICES_NS, device_id)
            for group in self.registry.list_groups():
                self.store.put(GROUPS_NS, group.group_id, group.to_record())

    # -- groups ---------------------------------------------------------------------

    def create_group(self, **kwargs) -> Group:
        with self.lock, self.store.transaction():
            group = self.registry.create_group(**kwargs)
            self.store.put(GROUPS_NS, group.group_id, group.to_record())
            return group

    def update_group(self, group_id: str, **changes) -> Group:
        with self.lock, self.store.transaction():
            group = self.registry.update_group(group_id, **changes)
            self.store.put(GROUPS_NS, group.group_id, group.to_record())
            return group

    def delete_group(self, group_id: str) -> None:
        with self.lock, self.store.transaction():
            self.registry.delete_group(group_id)
            self.store.delete(GROUPS_NS, group_id)

    # -- schedules ---------------------------------------------------------------------

    def create_schedule(self, schedule: Schedule) -> Schedule:
        schedule.validate()  # before any state changes
        with self.lock, self.store.transaction():
            self.scheduler.add(schedule)
            self.store.put(SCHEDULES_NS, schedule.schedule_id,
                           schedule_to_record(schedule))
            return schedule

    def update_schedule(self, schedule: Schedule) -> Schedule:
        schedule.validate()
        with self.lock, self.store.transaction():
            self.scheduler.replace(schedule, effect_from=self.now())
            self.store.put(SCHEDULES_NS, schedule.schedule_id,
                           schedule_to_record(schedule))
            return schedule

    def delete_schedule(self, schedule_id: str) -> None:
        with self.lock, self.store.transaction():
            self.scheduler.remove(schedule_id)
            self.store.delete(SCHEDULES_NS, schedule_id)

    # -- operations ------------------------------------------------------------------------

    def locate_now(self, device_id: str):
        with self.lock:
            return self.gateway.dispatch_locate(device_id, self.now())

    def fleet_status(self) -> dict:
        with self.lock:
            devices = []
            for device in sorted(self.registry.list_devices(),
                                 key=lambda d: d.device_id):
                last = self.pipeline.last_position(device.device_id)
                job = self.gateway.outstanding_job(device.device_id)
                devices.append({
                    "device_id": device.device_id,
                    "label": device.label,
                    "phone_number": device.phone_number,
                    "imei": device.imei,
                    "last_position": last.to_record() if last else None,
                    "battery_percent": last.battery_percent if last else None,
                    "outstanding_job": {
                        "job_id": job.job_id,
                        "device_id": job.device_id,
                        "schedule_id": job.schedule_id,
                        "state": job.state,
                        "submitted_at": job.to_record()["submitted_at"],
                        "latency_s": job.latency_s,
                    } if job else None,
                    "last_latency_s": self.gateway.last_latency_s(device.device_id),
                })
            return {"devices": devices, "server_time": format_ts(self.now()),
                    "event_seq": self.events.last_seq}

    # -- battery model -------------------------------------------------------------------------

    def battery_model(self) -> BatteryModel:
        rec = self.store.get(MODELS_NS, BATTERY_MODEL_ID)
        return BatteryModel.from_dict(rec)

    def fit_battery(self, points, capacity_mah: float) -> BatteryModel:
        model = fit_battery_model(points, capacity_mah)
        with self.lock:
            self.store.put(MODELS_NS, BATTERY_MODEL_ID, model.to_dict())
        return model

    def predict(self, interval_minutes: Optional[float] = None,
                schedule: Optional[Schedule] = None) -> float:
        model = self.battery_model()
        if interval_minutes is not None:
            return predict_lifetime(model, interval_minutes)
        if schedule is not None:
            return predict_lifetime_for_schedule(model, schedule,
                                                 default_tz=self.default_tz)
        raise SmsTrackError("predict requires an interval or a schedule")
