from datetime import datetime, timezone

import pytest

from smstrack.gateway import LoopbackTransport, SmsGateway
from smstrack.pipeline import PositionPipeline
from smstrack.registry import DeviceRegistry
from smstrack.store import Store

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)


class Harness:
    """Registry + store + pipeline + gateway wired over a loopback transport."""

    def __init__(self, tmp_path, timeout_s=180):
        self.events = []
        self.store = Store(tmp_path / "store", fsync=False)
        self.registry = DeviceRegistry(allocate_id=self.store.next_id)
        self.pipeline = PositionPipeline(self.store, self.registry)
        self.transport = LoopbackTransport()
        self.gateway = SmsGateway(
            self.registry, self.store, self.pipeline, self.transport,
            timeout_s=timeout_s,
            on_event=lambda kind, data: self.events.append((kind, data)))

    def add_device(self, imei="359710049887766", phone="+60123456789",
                   password="123456", label="car-A"):
        return self.registry.register_device(
            imei=imei, phone_number=phone, password=password,
            battery_capacity_mah=850, label=label)


@pytest.fixture
def harness(tmp_path):
    h = Harness(tmp_path)
    yield h
    h.store.close()
