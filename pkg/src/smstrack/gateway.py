"""The chokepoint between the server and the SMS world.

Sends locate commands, correlates inbound responses to outstanding jobs,
expires silent devices, and appends every message to the message log.
All methods are called from one serialized control loop; job state needs
no locking. Time is always passed in, never read from the wall clock.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Callable, Optional, Protocol

from .codec import MessageKind, encode_locate_command, parse_tracker_response
from .errors import DuplicateOutstanding, SmsTrackError, TransportUnavailable
from .pipeline import PositionPipeline
from .registry import DeviceRegistry
from .store import Store
from .timeutil import format_ts, parse_ts

DEFAULT_RESPONSE_TIMEOUT_S = 180  # ~4x the worst measured mean response time
MAX_SMS_BODY_LEN = 160

JOBS_NS = "jobs"
MESSAGES_NS = "messages"
MESSAGE_LOG_FILE = "messages.log"

JOB_SENT = "sent"
JOB_COMPLETED = "completed"
JOB_TIMED_OUT = "timed_out"


@dataclass(frozen=True)
class OutboundSms:
    to: str
    body: str
    submitted_at: datetime
    correlation: str  # job id or "manual"

    def __post_init__(self):
        if len(self.body) > MAX_SMS_BODY_LEN:
            raise SmsTrackError(f"SMS body exceeds {MAX_SMS_BODY_LEN} chars")


@dataclass(frozen=True)
class InboundSms:
    sender: str
    body: str
    received_at: datetime


class TransportPort(Protocol):
    """send is at-most-once per call; poll drains without loss or duplication."""

    def send(self, sms: OutboundSms) -> None: ...

    def poll(self) -> list[InboundSms]: ...


class LoopbackTransport:
    """In-memory transport for tests: captures sends, queues inbound."""

    def __init__(self):
        self.sent: list[OutboundSms] = []
        self.inbox: list[InboundSms] = []
        self.down = False

    def send(self, sms: OutboundSms) -> None:
        if self.down:
            raise TransportUnavailable("loopback transport marked down")
        self.sent.append(sms)

    def poll(self) -> list[InboundSms]:
        drained, self.inbox = self.inbox, []
        return drained


class HttpModemTransport:
    """Client for the HTTP modem gateway contract:
    POST {base}/sms with {"to", "body"}; GET {base}/sms/inbox?since=<ts>
    returning {"messages": [{"from", "body", "received_at"}]}."""

    def __init__(self, base_url: str, client=None):
        import httpx

        self._base = base_url.rstrip("/")
        self._client = client or httpx.Client(timeout=10.0)
        self._since: Optional[str] = None

    def send(self, sms: OutboundSms) -> None:
        try:
            resp = self._client.post(f"{self._base}/sms",
                                     json={"to": sms.to, "body": sms.body})
            resp.raise_for_status()
        except Exception as exc:
            raise TransportUnavailable(f"modem gateway send failed: {exc}") from exc

    def poll(self) -> list[InboundSms]:
        params = {"since": self._since} if self._since else {}
        try:
            resp = self._client.get(f"{self._base}/sms/inbox", params=params)
            resp.raise_for_status()
            payload = resp.json()
        except Exception as exc:
            raise TransportUnavailable(f"modem gateway poll failed: {exc}") from exc
        messages = []
        for item in payload.get("messages", []):
            messages.append(InboundSms(
                sender=item["from"], body=item["body"],
                received_at=parse_ts(item["received_at"])))
            self._since = item["received_at"]
        return messages


# -- AT command wire contract (text mode) -------------------------------------
#
# Sending:  AT+CMGF=1            -> OK
#           AT+CMGS="<number>"   -> "> " prompt
#           <body><Ctrl-Z>       -> +CMGS: <ref> / OK
# Polling:  AT+CMGL="ALL"        -> zero or more +CMGL blocks, then OK

AT_CTRL_Z = "\x1a"

_CMGL_HEADER = re.compile(
    r'^\+CMGL:\s*(\d+),"([^"]*)","([^"]*)",[^,]*,"([^"]*)"\s*$')


def at_send_frames(to: str, body: str) -> list[str]:
    """Command sequence a serial adapter writes to deliver one SMS."""
    if len(body) > MAX_SMS_BODY_LEN:
        raise SmsTrackError(f"SMS body exceeds {MAX_SMS_BODY_LEN} chars")
    return ["AT+CMGF=1", f'AT+CMGS="{to}"', body + AT_CTRL_Z]


def parse_cmgl_output(text: str) -> list[tuple[str, str, str]]:
    """Parse AT+CMGL="ALL" output into (sender, timestamp, body) tuples."""
    results: list[tuple[str, str, str]] = []
    sender = stamp = None
    body_lines: list[str] = []
    for line in text.splitlines():
        header = _CMGL_HEADER.match(line.strip())
        if header:
            if sender is not None:
                results.append((sender, stamp, "\n".join(body_lines).strip()))
            sender, stamp = header.group(3), header.group(4)
            body_lines = []
        elif line.strip() in ("OK", "ERROR"):
            break
        elif sender is not None:
            body_lines.append(line)
    if sender is not None:
        results.append((sender, stamp, "\n".join(body_lines).strip()))
    return results


# -- job records ---------------------------------------------------------------

@dataclass(frozen=True)
class JobRecord:
    job_id: str
    device_id: str
    schedule_id: str
    fire_at: datetime
    submitted_at: datetime
    state: str
    completed_at: Optional[datetime] = None
    latency_s: Optional[float] = None

    def to_record(self) -> dict:
        return {
            "job_id": self.job_id,
            "device_id": self.device_id,
            "schedule_id": self.schedule_id,
            "fire_at": format_ts(self.fire_at),
            "submitted_at": format_ts(self.submitted_at),
            "state": self.state,
            "completed_at": format_ts(self.completed_at) if self.completed_at else None,
            "latency_s": self.latency_s,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "JobRecord":
        return cls(
            job_id=rec["job_id"],
            device_id=rec["device_id"],
            schedule_id=rec["schedule_id"],
            fire_at=parse_ts(rec["fire_at"]),
            submitted_at=parse_ts(rec["submitted_at"]),
            state=rec["state"],
            completed_at=parse_ts(rec["completed_at"]) if rec.get("completed_at") else None,
            latency_s=rec.get("latency_s"),
        )


class SmsGateway:
    def __init__(self, registry: DeviceRegistry, store: Store,
                 pipeline: PositionPipeline, transport: TransportPort,
                 timeout_s: float = DEFAULT_RESPONSE_TIMEOUT_S,
                 on_event: Optional[Callable[[str, dict], None]] = None):
        self._registry = registry
        self._store = store
        self._pipeline = pipeline
        self._transport = transport
        self._timeout = timedelta(seconds=timeout_s)
        self._on_event = on_event or (lambda kind, data: None)
        self._outstanding: dict[str, JobRecord] = {}
        self._last_latency: dict[str, float] = {}
        self._recover_job_state()

    def _recover_job_state(self) -> None:
        # scan order is allocation order (ids are zero-padded), so last wins
        for rec in self._store.scan(JOBS_NS):
            job = JobRecord.from_record(rec)
            if job.state == JOB_SENT:
                self._outstanding[job.device_id] = job
            elif job.state == JOB_COMPLETED and job.latency_s is not None:
                self._last_latency[job.device_id] = job.latency_s

    # -- queries -------------------------------------------------------------

    def has_outstanding(self, device_id: str) -> bool:
        return device_id in self._outstanding

    def outstanding_job(self, device_id: str) -> Optional[JobRecord]:
        return self._outstanding.get(device_id)

    def last_latency_s(self, device_id: str) -> Optional[float]:
        return self._last_latency.get(device_id)

    # -- operations ------------------------------------------------------------

    def dispatch_locate(self, device_id: str, now: datetime,
                        schedule_id: str = "manual",
                        fire_at: Optional[datetime] = None) -> JobRecord:
        device = self._registry.get_device(device_id)
        if device_id in self._outstanding:
            raise DuplicateOutstanding(
                f"device {device_id} already has job "
                f"{self._outstanding[device_id].job_id} outstanding")
        body = encode_locate_command(device.password)
        sms = OutboundSms(to=device.phone_number, body=body,
                          submitted_at=now, correlation=schedule_id)
        self._transport.send(sms)  # raises TransportUnavailable; nothing recorded
        with self._store.transaction():
            job = JobRecord(
                job_id=self._store.next_id("job"),
                device_id=device_id,
                schedule_id=schedule_id,
                fire_at=fire_at or now,
                submitted_at=now,
                state=JOB_SENT,
            )
            self._store.put(JOBS_NS, job.job_id, job.to_record())
            self._log_message(direction="out", peer=device.phone_number, body=body,
                              at=now, device_id=device_id, kind=None,
                              correlation=job.job_id)
        self._outstanding[device_id] = job
        self._on_event("job-state-changed", {"job": job.to_record()})
        return job

    def on_inbound(self, sms: InboundSms) -> dict:
        """Route one inbound SMS: log it, parse it, complete the matching
        job, ingest the position. Unknown senders are logged and dropped."""
        device = self._registry.resolve_by_phone(sms.sender)
        msg = parse_tracker_response(sms.body)
        with self._store.transaction():
            message_id = self._log_message(
                direction="in", peer=sms.sender, body=sms.body,
                at=sms.received_at, device_id=device.device_id if device else None,
                kind=msg.kind.value, correlation=None)
        outcome = {"message_id": message_id, "device_id": None,
                   "job_id": None, "position_id": None, "kind": msg.kind.value}
        if device is None:
            return outcome
        outcome["device_id"] = device.device_id

        # an unrecognized body does not answer the locate; the job waits for
        # a real response or the timeout
        job = self._outstanding.get(device.device_id)
        if job is not None and msg.kind is not MessageKind.UNRECOGNIZED:
            latency = (sms.received_at - job.submitted_at).total_seconds()
            completed = JobRecord(
                job_id=job.job_id, device_id=job.device_id,
                schedule_id=job.schedule_id, fire_at=job.fire_at,
                submitted_at=job.submitted_at, state=JOB_COMPLETED,
                completed_at=sms.received_at, latency_s=latency)
            self._store.put(JOBS_NS, completed.job_id, completed.to_record())
            del self._outstanding[device.device_id]
            self._last_latency[device.device_id] = latency
            outcome["job_id"] = completed.job_id
            self._on_event("job-state-changed", {"job": completed.to_record()})

        position = self._pipeline.ingest(device.device_id, msg,
                                         server_time=sms.received_at,
                                         source_message_id=message_id)
        if position is not None:
            outcome["position_id"] = position.position_id
            self._on_event("position-ingested", {"position": position.to_record()})
        return outcome

    def expire_timeouts(self, now: datetime) -> list[JobRecord]:
        expired = []
        for device_id, job in list(self._outstanding.items()):
            if now - job.submitted_at >= self._timeout:
                timed_out = JobRecord(
                    job_id=job.job_id, device_id=job.device_id,
                    schedule_id=job.schedule_id, fire_at=job.fire_at,
                    submitted_at=job.submitted_at, state=JOB_TIMED_OUT,
                    completed_at=now)
                self._store.put(JOBS_NS, timed_out.job_id, timed_out.to_record())
                del self._outstanding[device_id]
                expired.append(timed_out)
                self._on_event("job-state-changed", {"job": timed_out.to_record()})
        return expired

    def poll_transport(self) -> list[dict]:
        """Drain the transport and route everything received."""
        return [self.on_inbound(sms) for sms in self._transport.poll()]

    # -- message log -------------------------------------------------------------

    def _log_message(self, direction: str, peer: str, body: str, at: datetime,
                     device_id: Optional[str], kind: Optional[str],
                     correlation: Optional[str]) -> str:
        message_id = self._store.next_id("msg")
        record = {
            "message_id": message_id,
            "direction": direction,
            "peer": peer,
            "body": body,
            "at": format_ts(at),
            "device_id": device_id,
            "kind": kind,
            "correlation": correlation,
        }
        self._store.put(MESSAGES_NS, message_id, record)
        log_path = Path(self._store.path) / MESSAGE_LOG_FILE
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
        return message_id
