"""Devices, groups, and the phone-number routing map for inbound SMS."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .errors import (
    DuplicateImei,
    DuplicatePhoneNumber,
    InvalidImei,
    InvalidPassword,
    InvalidPhoneNumber,
    SmsTrackError,
    UnknownDevice,
    UnknownGroup,
)

DEFAULT_BATTERY_CAPACITY_MAH = 850.0  # the smaller of the two shipped packs

_IMEI_RE = re.compile(r"^\d{15}$")
_PASSWORD_RE = re.compile(r"^\d{6}$")
_PHONE_RE = re.compile(r"^\+?\d{6,15}$")


@dataclass(frozen=True)
class Device:
    device_id: str
    imei: str
    phone_number: str
    password: str
    battery_capacity_mah: float = DEFAULT_BATTERY_CAPACITY_MAH
    label: str = ""

    def to_record(self) -> dict:
        return {
            "device_id": self.device_id,
            "imei": self.imei,
            "phone_number": self.phone_number,
            "password": self.password,
            "battery_capacity_mah": self.battery_capacity_mah,
            "label": self.label,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Device":
        return cls(
            device_id=rec["device_id"],
            imei=rec["imei"],
            phone_number=rec["phone_number"],
            password=rec["password"],
            battery_capacity_mah=float(rec.get("battery_capacity_mah",
                                               DEFAULT_BATTERY_CAPACITY_MAH)),
            label=rec.get("label", ""),
        )


@dataclass
class Group:
    group_id: str
    name: str
    member_device_ids: set[str] = field(default_factory=set)

    def to_record(self) -> dict:
        return {
            "group_id": self.group_id,
            "name": self.name,
            "member_device_ids": sorted(self.member_device_ids),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Group":
        return cls(
            group_id=rec["group_id"],
            name=rec["name"],
            member_device_ids=set(rec.get("member_device_ids", [])),
        )


def _validate_device_fields(imei: str, phone_number: str, password: str,
                            battery_capacity_mah: float) -> None:
    if not _IMEI_RE.match(imei or ""):
        raise InvalidImei(f"imei must be 15 decimal digits, got {imei!r}")
    if not _PHONE_RE.match(phone_number or ""):
        raise InvalidPhoneNumber(f"phone number must be E.164-like, got {phone_number!r}")
    if not _PASSWORD_RE.match(password or ""):
        raise InvalidPassword("device password must be exactly six decimal digits")
    if battery_capacity_mah <= 0:
        raise SmsTrackError("battery capacity must be positive")


class DeviceRegistry:
    """In-memory authoritative view; persisted through the store by callers."""

    def __init__(self, allocate_id=None):
        self._devices: dict[str, Device] = {}
        self._groups: dict[str, Group] = {}
        self._by_phone: dict[str, str] = {}
        self._by_imei: dict[str, str] = {}
        self._counter = 0
        self._allocate_id = allocate_id

    def _new_id(self, prefix: str) -> str:
        if self._allocate_id is not None:
            return self._allocate_id(prefix)
        self._counter += 1
        return f"{prefix}-{self._counter}"

    # -- devices -----------------------------------------------------------

    def register_device(self, imei: str, phone_number: str, password: str,
                        battery_capacity_mah: float = DEFAULT_BATTERY_CAPACITY_MAH,
                        label: str = "", device_id: Optional[str] = None) -> Device:
        _validate_device_fields(imei, phone_number, password, battery_capacity_mah)
        if imei in self._by_imei:
            raise DuplicateImei(f"imei {imei} already registered")
        if phone_number in self._by_phone:
            raise DuplicatePhoneNumber(f"phone number {phone_number} already registered")
        device = Device(
            device_id=device_id or self._new_id("dev"),
            imei=imei,
            phone_number=phone_number,
            password=password,
            battery_capacity_mah=float(battery_capacity_mah),
            label=label,
        )
        if device.device_id in self._devices:
            raise SmsTrackError(f"device id {device.device_id} already in use")
        self._devices[device.device_id] = device
        self._by_phone[phone_number] = device.device_id
        self._by_imei[imei] = device.device_id
        return device

    def update_device(self, device_id: str, *, phone_number: Optional[str] = None,
                      password: Optional[str] = None, label: Optional[str] = None,
                      battery_capacity_mah: Optional[float] = None) -> Device:
        device = self.get_device(device_id)
        changes: dict = {}
        if phone_number is not None and phone_number != device.phone_number:
            if not _PHONE_RE.match(phone_number):
                raise InvalidPhoneNumber(f"phone number must be E.164-like, got {phone_number!r}")
            if phone_number in self._by_phone:
                raise DuplicatePhoneNumber(f"phone number {phone_number} already registered")
            changes["phone_number"] = phone_number
        if password is not None:
            if not _PASSWORD_RE.match(password):
                raise InvalidPassword("device password must be exactly six decimal digits")
            changes["password"] = password
        if label is not None:
            changes["label"] = label
        if battery_capacity_mah is not None:
            if battery_capacity_mah <= 0:
                raise SmsTrackError("battery capacity must be positive")
            changes["battery_capacity_mah"] = float(battery_capacity_mah)
        if not changes:
            return device
        updated = replace(device, **changes)
        if "phone_number" in changes:
            del self._by_phone[device.phone_number]
            self._by_phone[updated.phone_number] = device_id
        self._devices[device_id] = updated
        return updated

    def delete_device(self, device_id: str) -> None:
        device = self.get_device(device_id)
        del self._devices[device_id]
        del self._by_phone[device.phone_number]
        del self._by_imei[device.imei]
        for group in self._groups.values():
            group.member_device_ids.discard(device_id)

    def get_device(self, device_id: str) -> Device:
        try:
            return self._devices[device_id]
        except KeyError:
            raise UnknownDevice(f"no device with id {device_id!r}") from None

    def has_device(self, device_id: str) -> bool:
        return device_id in self._devices

    def list_devices(self) -> list[Device]:
        return list(self._devices.values())

    def resolve_by_phone(self, phone_number: str) -> Optional[Device]:
        device_id = self._by_phone.get(phone_number)
        return self._devices.get(device_id) if device_id else None

    # -- groups ------------------------------------------------------------

    def create_group(self, name: str, member_device_ids: Iterable[str] = (),
                     group_id: Optional[str] = None) -> Group:
        members = set(member_device_ids)
        for device_id in members:
            self.get_device(device_id)
        group = Group(group_id=group_id or self._new_id("grp"), name=name,
                      member_device_ids=members)
        if group.group_id in self._groups:
            raise SmsTrackError(f"group id {group.group_id} already in use")
        self._groups[group.group_id] = group
        return group

    def update_group(self, group_id: str, *, name: Optional[str] = None,
                     member_device_ids: Optional[Iterable[str]] = None) -> Group:
        group = self.get_group(group_id)
        if name is not None:
            group.name = name
        if member_device_ids is not None:
            members = set(member_device_ids)
            for device_id in members:
                self.get_device(device_id)
            group.member_device_ids = members
        return group

    def delete_group(self, group_id: str) -> None:
        self.get_group(group_id)
        del self._groups[group_id]

    def get_group(self, group_id: str) -> Group:
        try:
            return self._groups[group_id]
        except KeyError:
            raise UnknownGroup(f"no group with id {group_id!r}") from None

    def list_groups(self) -> list[Group]:
        return list(self._groups.values())

    def group_members(self, group_id: str) -> list[Device]:
        group = self.get_group(group_id)
        return [self._devices[d] for d in sorted(group.member_device_ids)
                if d in self._devices]

    def resolve_targets(self, target_kind: str, target_id: str) -> list[str]:
        """Expand a schedule target to device ids; unknown targets expand to []."""
        if target_kind == "device":
            return [target_id] if target_id in self._devices else []
        if target_kind == "group" and target_id in self._groups:
            return sorted(self._groups[target_id].member_device_ids)
        return []

    # -- backup ------------------------------------------------------------

    def export_jsonl(self, path: str) -> None:
        """One JSON object per line: devices first, then groups."""
        with open(path, "w", encoding="utf-8") as fh:
            for device in self._devices.values():
                fh.write(json.dumps({"type": "device", **device.to_record()},
                                    sort_keys=True) + "\n")
            for group in self._groups.values():
                fh.write(json.dumps({"type": "group", **group.to_record()},
                                    sort_keys=True) + "\n")

    def import_jsonl(self, path: str) -> None:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if rec.get("type") == "device":
                    device = Device.from_record(rec)
                    self.register_device(
                        imei=device.imei, phone_number=device.phone_number,
                        password=device.password,
                        battery_capacity_mah=device.battery_capacity_mah,
                        label=device.label, device_id=device.device_id)
                elif rec.get("type") == "group":
                    group = Group.from_record(rec)
                    self.create_group(name=group.name,
                                      member_device_ids=group.member_device_ids,
                                      group_id=group.group_id)
