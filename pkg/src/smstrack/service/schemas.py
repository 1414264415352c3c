"""Pydantic request/response models for the HTTP control plane."""

from __future__ import annotations

from datetime import datetime
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class DeviceCreate(BaseModel):
    imei: str
    phone_number: str
    password: str = "123456"
    battery_capacity_mah: float = 850
    label: str = ""


class DevicePatch(BaseModel):
    phone_number: Optional[str] = None
    password: Optional[str] = None
    battery_capacity_mah: Optional[float] = None
    label: Optional[str] = None


class DeviceOut(BaseModel):
    device_id: str
    imei: str
    phone_number: str
    battery_capacity_mah: float
    label: str


class GroupCreate(BaseModel):
    name: str
    member_device_ids: list[str] = Field(default_factory=list)


class GroupPatch(BaseModel):
    name: Optional[str] = None
    member_device_ids: Optional[list[str]] = None


class GroupOut(BaseModel):
    group_id: str
    name: str
    member_device_ids: list[str]


class WindowIn(BaseModel):
    start: str = "00:00"
    end: str = "24:00"
    days: list[str]
    timezone: Optional[str] = None


class TargetIn(BaseModel):
    kind: Literal["device", "group"]
    id: str


class ScheduleCreate(BaseModel):
    kind: Literal["date", "interval", "cron"]
    target: TargetIn
    at: Optional[datetime] = None
    every_s: Optional[int] = None
    cron: Optional[str] = None
    window: Optional[WindowIn] = None
    enabled: bool = True
    label: str = ""


class SchedulePatch(BaseModel):
    at: Optional[datetime] = None
    every_s: Optional[int] = None
    cron: Optional[str] = None
    window: Optional[WindowIn] = None
    enabled: Optional[bool] = None
    label: Optional[str] = None


class ScheduleOut(BaseModel):
    model_config = ConfigDict(extra="allow")

    schedule_id: str
    kind: str
    target: dict
    starts_at: str
    at: Optional[str] = None
    every_s: Optional[int] = None
    cron: Optional[str] = None
    window: Optional[dict] = None
    enabled: bool
    label: str


class PositionOut(BaseModel):
    position_id: str
    device_id: str
    latitude: float
    longitude: float
    speed_kmh: Optional[float] = None
    battery_percent: Optional[int] = None
    fix_quality: str
    is_repeat: bool
    device_time: Optional[str] = None
    server_time: str
    source_message_id: str


class TrackPage(BaseModel):
    positions: list[PositionOut]
    next_cursor: Optional[str] = None


class JobOut(BaseModel):
    job_id: str
    device_id: str
    schedule_id: str
    state: str
    submitted_at: str
    latency_s: Optional[float] = None


class LocateAccepted(BaseModel):
    job_id: str
    device_id: str
    state: str


class FleetDeviceStatus(BaseModel):
    device_id: str
    label: str
    phone_number: str
    imei: str
    last_position: Optional[PositionOut] = None
    battery_percent: Optional[int] = None
    outstanding_job: Optional[JobOut] = None
    last_latency_s: Optional[float] = None


class FleetStatus(BaseModel):
    devices: list[FleetDeviceStatus]
    server_time: str
    event_seq: int


class BatteryModelOut(BaseModel):
    capacity_mah: float
    idle_draw_ma: float
    per_request_mah: float


class BatteryFitRequest(BaseModel):
    points: list[tuple[float, float]]  # (interval_minutes, lifetime_minutes)
    capacity_mah: float = 850


class LifetimePrediction(BaseModel):
    lifetime_minutes: float
    interval_minutes: Optional[float] = None


class PredictRequest(BaseModel):
    interval_minutes: Optional[float] = None
    schedule: Optional[ScheduleCreate] = None
    schedule_id: Optional[str] = None


class ErrorDetail(BaseModel):
    error: str
    message: str
    field: Optional[str] = None
    cron_field: Optional[int] = None
