// API payload shapes, mirroring the server's JSON documents.

export interface Device {
  device_id: string;
  imei: string;
  phone_number: string;
  battery_capacity_mah: number;
  label: string;
}

export interface Group {
  group_id: string;
  name: string;
  member_device_ids: string[];
}

export type FixQuality = "fresh" | "stale" | "salvaged";

export interface Position {
  position_id: string;
  device_id: string;
  latitude: number;
  longitude: number;
  speed_kmh: number | null;
  battery_percent: number | null;
  fix_quality: FixQuality;
  is_repeat: boolean;
  server_time: string;
  source_message_id: string;
}

export interface JobInfo {
  job_id: string;
  device_id: string;
  schedule_id: string;
  state: "sent" | "completed" | "timed_out";
  submitted_at: string;
  latency_s: number | null;
}

export interface FleetDevice {
  device_id: string;
  label: string;
  phone_number: string;
  imei: string;
  last_position: Position | null;
  battery_percent: number | null;
  outstanding_job: JobInfo | null;
  last_latency_s: number | null;
}

export interface FleetStatus {
  devices: FleetDevice[];
  server_time: string;
  event_seq: number;
}

export interface ActivationWindow {
  start: string;
  end: string;
  days: string[];
  timezone: string | null;
}

export interface Schedule {
  schedule_id: string;
  kind: "date" | "interval" | "cron";
  target: { kind: "device" | "group"; id: string };
  starts_at: string;
  at: string | null;
  every_s: number | null;
  cron: string | null;
  window: ActivationWindow | null;
  enabled: boolean;
  label: string;
}

export interface BatteryModel {
  capacity_mah: number;
  idle_draw_ma: number;
  per_request_mah: number;
}

export interface ApiEvent {
  seq: number;
  type: "position-ingested" | "job-state-changed" | "schedule-fired";
  time: string;
  data: Record<string, unknown>;
}

export interface ApiErrorDetail {
  error: string;
  message: string;
  field?: string;
  cron_field?: number;
}
