// Schedule editor logic: turn form state into API payloads and map the
// server's field-level validation errors back onto form fields. All real
// validation happens server-side; this module only shapes requests.

import { ApiErrorDetail } from "./types.js";

export const WEEKDAYS = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"] as const;

export interface WindowForm {
  enabled: boolean;
  start: string; // "HH:MM"
  end: string;
  days: string[];
  timezone: string; // empty = server default
}

export interface ScheduleForm {
  kind: "date" | "interval" | "cron";
  targetKind: "device" | "group";
  targetId: string;
  at: string; // ISO local datetime from <input type=datetime-local>
  everyMinutes: number;
  cron: string;
  window: WindowForm;
  label: string;
}

export function emptyScheduleForm(): ScheduleForm {
  return {
    kind: "interval",
    targetKind: "device",
    targetId: "",
    at: "",
    everyMinutes: 20,
    cron: "0 14-18 * * 6,0",
    label: "",
    window: { enabled: false, start: "14:00", end: "19:00", days: ["sat", "sun"], timezone: "" },
  };
}

export interface SchedulePayload {
  kind: string;
  target: { kind: string; id: string };
  at?: string;
  every_s?: number;
  cron?: string;
  window?: { start: string; end: string; days: string[]; timezone: string | null };
  enabled: boolean;
  label: string;
}

/** Build the POST /schedules body; throws Error for form states the UI
 * should not submit (missing target etc.). */
export function buildSchedulePayload(form: ScheduleForm): SchedulePayload {
  if (!form.targetId) throw new Error("pick a target device or group");
  const payload: SchedulePayload = {
    kind: form.kind,
    target: { kind: form.targetKind, id: form.targetId },
    enabled: true,
    label: form.label,
  };
  if (form.kind === "date") {
    if (!form.at) throw new Error("pick a date and time");
    payload.at = new Date(form.at).toISOString();
  } else if (form.kind === "interval") {
    payload.every_s = Math.round(form.everyMinutes * 60);
  } else {
    payload.cron = form.cron.trim();
  }
  if (form.window.enabled) {
    if (form.window.days.length === 0) throw new Error("pick at least one weekday");
    payload.window = {
      start: form.window.start,
      end: form.window.end,
      days: form.window.days,
      timezone: form.window.timezone || null,
    };
  }
  return payload;
}

/** Payload for the live lifetime estimate of the form being edited. */
export function buildPredictPayload(form: ScheduleForm): { schedule: SchedulePayload } {
  return { schedule: buildSchedulePayload(form) };
}

export interface FieldError {
  field: "cron" | "every" | "at" | "window" | "general";
  message: string;
  cronField?: number;
}

const CRON_FIELD_NAMES = ["minute", "hour", "day-of-month", "month", "day-of-week"];

/** Map a server validation error onto the form field that caused it. */
export function mapServerError(detail: ApiErrorDetail): FieldError {
  if (detail.error === "CronSyntaxError" && detail.cron_field !== undefined) {
    return {
      field: "cron",
      cronField: detail.cron_field,
      message: `${CRON_FIELD_NAMES[detail.cron_field] ?? "field"}: ${detail.message}`,
    };
  }
  const msg = detail.message.toLowerCase();
  if (msg.includes("interval")) return { field: "every", message: detail.message };
  if (msg.includes("window") || msg.includes("weekday")) {
    return { field: "window", message: detail.message };
  }
  if (msg.includes("date") || msg.includes("past")) {
    return { field: "at", message: detail.message };
  }
  return { field: "general", message: detail.message };
}

export function describeLifetime(minutes: number): string {
  if (!isFinite(minutes)) return "n/a";
  const days = minutes / 1440;
  if (days >= 2) return `${Math.round(minutes)} min (~${days.toFixed(1)} days)`;
  const hours = minutes / 60;
  return `${Math.round(minutes)} min (~${hours.toFixed(1)} h)`;
}
