// Typed fetch client for the control plane. Every number the console shows
// comes from these endpoints; no business logic happens client-side.

import { ConsoleSession } from "./session.js";
import {
  ApiErrorDetail,
  BatteryModel,
  Device,
  FleetStatus,
  Group,
  Position,
  Schedule,
} from "./types.js";

export class ApiError extends Error {
  detail: ApiErrorDetail;
  status: number;

  constructor(status: number, detail: ApiErrorDetail) {
    super(detail.message);
    this.status = status;
    this.detail = detail;
  }
}

export class ApiClient {
  private session: ConsoleSession;

  constructor(session: ConsoleSession) {
    this.session = session;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(`${this.session.baseUrl}${path}`, {
      method,
      headers: {
        ...this.session.authHeaders(),
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (resp.status === 204) return undefined as T;
    const payload = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      const detail: ApiErrorDetail =
        payload && typeof payload.detail === "object" && payload.detail !== null
          ? payload.detail
          : { error: "HttpError", message: `HTTP ${resp.status}` };
      throw new ApiError(resp.status, detail);
    }
    return payload as T;
  }

  role(): Promise<{ role: "admin" | "viewer" }> {
    return this.request("GET", "/auth/role");
  }

  listDevices(): Promise<Device[]> {
    return this.request("GET", "/devices");
  }

  listGroups(): Promise<Group[]> {
    return this.request("GET", "/groups");
  }

  fleetStatus(): Promise<FleetStatus> {
    return this.request("GET", "/fleet/status");
  }

  locateNow(deviceId: string): Promise<{ job_id: string }> {
    return this.request("POST", `/devices/${deviceId}/locate`);
  }

  track(deviceId: string, from: string, to: string): Promise<{ positions: Position[] }> {
    const params = new URLSearchParams({ from, to });
    return this.request("GET", `/devices/${deviceId}/track?${params}`);
  }

  listSchedules(): Promise<Schedule[]> {
    return this.request("GET", "/schedules");
  }

  createSchedule(payload: unknown): Promise<Schedule> {
    return this.request("POST", "/schedules", payload);
  }

  patchSchedule(scheduleId: string, payload: unknown): Promise<Schedule> {
    return this.request("PATCH", `/schedules/${scheduleId}`, payload);
  }

  deleteSchedule(scheduleId: string): Promise<void> {
    return this.request("DELETE", `/schedules/${scheduleId}`);
  }

  batteryModel(): Promise<BatteryModel> {
    return this.request("GET", "/models/battery");
  }

  predictLifetime(payload: unknown): Promise<{ lifetime_minutes: number }> {
    return this.request("POST", "/models/battery/predict", payload);
  }
}
