"""HTTP control plane: device/group/schedule CRUD, manual locates, tracks,
fleet status, battery model endpoints and the server-push event stream."""

from __future__ import annotations

import asyncio
import json
from contextlib import asynccontextmanager
from datetime import timezone
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response, StreamingResponse
from fastapi.staticfiles import StaticFiles

from ..errors import (
    CronSyntaxError,
    DegenerateFit,
    DuplicateImei,
    DuplicateOutstanding,
    DuplicatePhoneNumber,
    InvalidImei,
    InvalidPassword,
    InvalidPhoneNumber,
    InvalidSchedule,
    NoFutureOccurrence,
    SmsTrackError,
    TransportUnavailable,
    UnknownDevice,
    UnknownGroup,
)
from ..scheduling import (
    Schedule,
    schedule_from_record,
    schedule_to_record,
    window_from_record,
)
from ..timeutil import format_ts, parse_ts
from . import schemas
from .runtime import ServerRuntime

STREAM_POLL_S = 0.05


def _validation_error(exc: SmsTrackError, field: Optional[str] = None) -> HTTPException:
    detail = {"error": type(exc).__name__, "message": str(exc)}
    if field:
        detail["field"] = field
    if isinstance(exc, CronSyntaxError):
        detail["field"] = "cron"
        detail["cron_field"] = exc.field_index
    return HTTPException(status_code=422, detail=detail)


def create_app(runtime: ServerRuntime, run_loop: bool = False) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if run_loop:
            runtime.start_loop()
        yield
        if run_loop:
            runtime.stop_loop()
        runtime.close()

    app = FastAPI(title="smstrack", version="0.1.0", lifespan=lifespan)
    app.state.runtime = runtime

    # -- auth -------------------------------------------------------------

    def _token_from_request(request: Request) -> Optional[str]:
        header = request.headers.get("authorization")
        if header and header.lower().startswith("bearer "):
            return header[7:].strip()
        return request.query_params.get("token")

    def require_viewer(request: Request) -> str:
        role = runtime.auth.role_for(_token_from_request(request))
        if role is None:
            raise HTTPException(status_code=401, detail={"error": "Unauthenticated",
                                                         "message": "missing or unknown token"})
        return role

    def require_admin(request: Request) -> str:
        role = require_viewer(request)
        if role != "admin":
            raise HTTPException(status_code=403, detail={"error": "Forbidden",
                                                         "message": "admin token required"})
        return role

    # -- error mapping ------------------------------------------------------

    @app.exception_handler(SmsTrackError)
    async def on_domain_error(request: Request, exc: SmsTrackError):
        if isinstance(exc, (UnknownDevice, UnknownGroup)):
            status = 404
        elif isinstance(exc, DuplicateOutstanding):
            status = 409
        elif isinstance(exc, TransportUnavailable):
            status = 503
        elif isinstance(exc, (DuplicateImei, DuplicatePhoneNumber, InvalidImei,
                              InvalidPassword, InvalidPhoneNumber, InvalidSchedule,
                              CronSyntaxError, NoFutureOccurrence, DegenerateFit)):
            return JSONResponse(status_code=422,
                                content={"detail": _validation_error(exc).detail})
        else:
            status = 400
        return JSONResponse(status_code=status,
                            content={"detail": {"error": type(exc).__name__,
                                                "message": str(exc)}})

    # -- health ----------------------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "server_time": format_ts(runtime.now())}

    @app.get("/auth/role")
    def auth_role(role: str = Depends(require_viewer)):
        return {"role": role}

    # -- devices ------------------------------------------------------------------

    @app.get("/devices", response_model=list[schemas.DeviceOut])
    def list_devices(role: str = Depends(require_viewer)):
        return [d.to_record() for d in sorted(runtime.registry.list_devices(),
                                              key=lambda d: d.device_id)]

    @app.post("/devices", response_model=schemas.DeviceOut, status_code=201)
    def create_device(body: schemas.DeviceCreate, role: str = Depends(require_admin)):
        device = runtime.create_device(
            imei=body.imei, phone_number=body.phone_number, password=body.password,
            battery_capacity_mah=body.battery_capacity_mah, label=body.label)
        return device.to_record()

    @app.get("/devices/{device_id}", response_model=schemas.DeviceOut)
    def get_device(device_id: str, role: str = Depends(require_viewer)):
        return runtime.registry.get_device(device_id).to_record()

    @app.patch("/devices/{device_id}", response_model=schemas.DeviceOut)
    def patch_device(device_id: str, body: schemas.DevicePatch,
                     role: str = Depends(require_admin)):
        device = runtime.update_device(
            device_id, phone_number=body.phone_number, password=body.password,
            label=body.label, battery_capacity_mah=body.battery_capacity_mah)
        return device.to_record()

    @app.delete("/devices/{device_id}", status_code=204)
    def delete_device(device_id: str, role: str = Depends(require_admin)):
        runtime.delete_device(device_id)
        return Response(status_code=204)

    @app.post("/devices/{device_id}/locate", response_model=schemas.LocateAccepted,
              status_code=202)
    def locate_now(device_id: str, role: str = Depends(require_admin)):
        job = runtime.locate_now(device_id)
        return {"job_id": job.job_id, "device_id": device_id, "state": job.state}

    @app.get("/devices/{device_id}/track")
    def get_track(device_id: str,
                  time_from: str = Query(alias="from"),
                  time_to: str = Query(alias="to"),
                  format: str = "json",
                  limit: Optional[int] = None,
                  cursor: Optional[str] = None,
                  role: str = Depends(require_viewer)):
        try:
            t_from, t_to = parse_ts(time_from), parse_ts(time_to)
        except ValueError:
            raise _validation_error(InvalidSchedule("from/to must be ISO-8601"),
                                    field="from") from None
        if format == "csv":
            doc = runtime.pipeline.export_track(device_id, t_from, t_to, "csv")
            return PlainTextResponse(doc, media_type="text/csv")
        if format == "geojson":
            doc = runtime.pipeline.export_track(device_id, t_from, t_to, "geojson")
            return Response(doc, media_type="application/geo+json")
        if format != "json":
            raise _validation_error(SmsTrackError(f"unknown format {format!r}"),
                                    field="format")
        cursor_tuple = None
        if cursor:
            st, _, pid = cursor.partition("|")
            cursor_tuple = (st, pid)
        positions = runtime.pipeline.query_track(device_id, t_from, t_to,
                                                 cursor=cursor_tuple, limit=limit)
        next_cursor = None
        if limit is not None and len(positions) == limit and positions:
            last = positions[-1].to_record()
            next_cursor = f"{last['server_time']}|{last['position_id']}"
        return {"positions": [p.to_record() for p in positions],
                "next_cursor": next_cursor}

    # -- groups ------------------------------------------------------------------------

    @app.get("/groups", response_model=list[schemas.GroupOut])
    def list_groups(role: str = Depends(require_viewer)):
        return [g.to_record() for g in sorted(runtime.registry.list_groups(),
                                              key=lambda g: g.group_id)]

    @app.post("/groups", response_model=schemas.GroupOut, status_code=201)
    def create_group(body: schemas.GroupCreate, role: str = Depends(require_admin)):
        group = runtime.create_group(name=body.name,
                                     member_device_ids=body.member_device_ids)
        return group.to_record()

    @app.get("/groups/{group_id}", response_model=schemas.GroupOut)
    def get_group(group_id: str, role: str = Depends(require_viewer)):
        return runtime.registry.get_group(group_id).to_record()

    @app.patch("/groups/{group_id}", response_model=schemas.GroupOut)
    def patch_group(group_id: str, body: schemas.GroupPatch,
                    role: str = Depends(require_admin)):
        group = runtime.update_group(group_id, name=body.name,
                                     member_device_ids=body.member_device_ids)
        return group.to_record()

    @app.delete("/groups/{group_id}", status_code=204)
    def delete_group(group_id: str, role: str = Depends(require_admin)):
        runtime.delete_group(group_id)
        return Response(status_code=204)

    # -- schedules ------------------------------------------------------------------------

    def _schedule_from_create(body: schemas.ScheduleCreate,
                              schedule_id: str) -> Schedule:
        window = window_from_record(body.window.model_dump()) if body.window else None
        at = body.at
        if at is not None and at.tzinfo is None:
            at = at.replace(tzinfo=timezone.utc)
        return Schedule(
            schedule_id=schedule_id,
            kind=body.kind,
            target_kind=body.target.kind,
            target_id=body.target.id,
            starts_at=runtime.now(),
            at=at,
            every_s=body.every_s,
            cron_expr=body.cron,
            window=window,
            enabled=body.enabled,
            label=body.label,
        )

    @app.get("/schedules", response_model=list[schemas.ScheduleOut])
    def list_schedules(role: str = Depends(require_viewer)):
        return [schedule_to_record(s)
                for s in sorted(runtime.scheduler.all(), key=lambda s: s.schedule_id)]

    @app.post("/schedules", response_model=schemas.ScheduleOut, status_code=201)
    def create_schedule(body: schemas.ScheduleCreate, role: str = Depends(require_admin)):
        if body.target.kind == "device":
            runtime.registry.get_device(body.target.id)
        else:
            runtime.registry.get_group(body.target.id)
        if body.kind == "date" and body.at is not None:
            at = body.at if body.at.tzinfo else body.at.replace(tzinfo=timezone.utc)
            if at <= runtime.now():
                raise NoFutureOccurrence("date schedule lies in the past")
        candidate = _schedule_from_create(body, schedule_id="pending")
        candidate.validate()  # full validation before any state is touched
        schedule = _schedule_from_create(body, schedule_id=runtime.store.next_id("sch"))
        runtime.create_schedule(schedule)
        return schedule_to_record(schedule)

    @app.get("/schedules/{schedule_id}", response_model=schemas.ScheduleOut)
    def get_schedule(schedule_id: str, role: str = Depends(require_viewer)):
        schedule = runtime.scheduler.get(schedule_id)
        if schedule is None:
            raise HTTPException(status_code=404,
                                detail={"error": "UnknownSchedule",
                                        "message": f"no schedule {schedule_id!r}"})
        return schedule_to_record(schedule)

    @app.patch("/schedules/{schedule_id}", response_model=schemas.ScheduleOut)
    def patch_schedule(schedule_id: str, body: schemas.SchedulePatch,
                       role: str = Depends(require_admin)):
        current = runtime.scheduler.get(schedule_id)
        if current is None:
            raise HTTPException(status_code=404,
                                detail={"error": "UnknownSchedule",
                                        "message": f"no schedule {schedule_id!r}"})
        record = schedule_to_record(current)
        updates = body.model_dump(exclude_unset=True)
        if "window" in updates:
            record["window"] = updates["window"]
        if "at" in updates and updates["at"] is not None:
            record["at"] = format_ts(updates["at"])
        for key in ("every_s", "cron", "enabled", "label"):
            if key in updates:
                record[key] = updates[key]
        schedule = schedule_from_record(record)
        schedule.validate()
        runtime.update_schedule(schedule)
        return schedule_to_record(schedule)

    @app.delete("/schedules/{schedule_id}", status_code=204)
    def delete_schedule(schedule_id: str, role: str = Depends(require_admin)):
        if runtime.scheduler.get(schedule_id) is None:
            raise HTTPException(status_code=404,
                                detail={"error": "UnknownSchedule",
                                        "message": f"no schedule {schedule_id!r}"})
        runtime.delete_schedule(schedule_id)
        return Response(status_code=204)

    # -- fleet status ----------------------------------------------------------------------

    @app.get("/fleet/status", response_model=schemas.FleetStatus)
    def fleet_status(role: str = Depends(require_viewer)):
        return runtime.fleet_status()

    # -- battery model ------------------------------------------------------------------------

    @app.get("/models/battery", response_model=schemas.BatteryModelOut)
    def get_battery_model(role: str = Depends(require_viewer)):
        return runtime.battery_model().to_dict()

    @app.post("/models/battery/fit", response_model=schemas.BatteryModelOut)
    def fit_battery_model_endpoint(body: schemas.BatteryFitRequest,
                                   role: str = Depends(require_admin)):
        model = runtime.fit_battery(body.points, body.capacity_mah)
        return model.to_dict()

    @app.post("/models/battery/predict", response_model=schemas.LifetimePrediction)
    def predict_lifetime_endpoint(body: schemas.PredictRequest,
                                  role: str = Depends(require_viewer)):
        if body.interval_minutes is not None:
            minutes = runtime.predict(interval_minutes=body.interval_minutes)
            return {"lifetime_minutes": minutes,
                    "interval_minutes": body.interval_minutes}
        if body.schedule_id is not None:
            schedule = runtime.scheduler.get(body.schedule_id)
            if schedule is None:
                raise HTTPException(status_code=404,
                                    detail={"error": "UnknownSchedule",
                                            "message": f"no schedule {body.schedule_id!r}"})
        elif body.schedule is not None:
            schedule = _schedule_from_create(body.schedule, schedule_id="preview")
            schedule.validate()
        else:
            raise _validation_error(
                SmsTrackError("provide interval_minutes, schedule or schedule_id"))
        return {"lifetime_minutes": runtime.predict(schedule=schedule)}

    # -- event stream ---------------------------------------------------------------------------

    @app.get("/events")
    async def events(request: Request,
                     since: Optional[int] = None,
                     limit: Optional[int] = None,
                     role: str = Depends(require_viewer)):
        """Server-sent events; each frame's id is the event sequence number.
        Resume with ?since=<seq> or the standard Last-Event-ID header."""
        resume_from = since
        if resume_from is None:
            header = request.headers.get("last-event-id")
            if header and header.isdigit():
                resume_from = int(header)
        if resume_from is None:
            resume_from = runtime.events.last_seq

        async def stream():
            cursor = resume_from
            sent = 0
            yield ": connected\n\n"
            while True:
                if await request.is_disconnected():
                    return
                for event in runtime.events.events_after(cursor, limit=500):
                    cursor = event.seq
                    payload = json.dumps(event.to_payload(), sort_keys=True)
                    yield f"id: {event.seq}\nevent: {event.event_type}\ndata: {payload}\n\n"
                    sent += 1
                    if limit is not None and sent >= limit:
                        return
                await asyncio.sleep(STREAM_POLL_S)

        return StreamingResponse(stream(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache",
                                          "X-Accel-Buffering": "no"})

    # -- static console -----------------------------------------------------------------------------

    if runtime.config.console_dir and Path(runtime.config.console_dir).is_dir():
        app.mount("/console", StaticFiles(directory=runtime.config.console_dir,
                                          html=True), name="console")

    return app
