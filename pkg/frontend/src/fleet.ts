// Fleet view model fed by /fleet/status snapshots plus live job/position
// events. Tracks consecutive timeouts per device so a dead locator gets a
// "presumed depleted" badge after going silent repeatedly.

import { ApiEvent, FleetDevice, FleetStatus, JobInfo, Position } from "./types.js";

export const DEPLETED_AFTER_TIMEOUTS = 3;

export interface DeviceRow {
  device: FleetDevice;
  consecutiveTimeouts: number;
  presumedDepleted: boolean;
}

export class FleetModel {
  private rows = new Map<string, DeviceRow>();

  loadStatus(status: FleetStatus): void {
    for (const device of status.devices) {
      const existing = this.rows.get(device.device_id);
      this.rows.set(device.device_id, {
        device,
        consecutiveTimeouts: existing?.consecutiveTimeouts ?? 0,
        presumedDepleted:
          device.battery_percent === 0 ||
          (existing?.presumedDepleted ?? false),
      });
    }
    for (const id of [...this.rows.keys()]) {
      if (!status.devices.some((d) => d.device_id === id)) this.rows.delete(id);
    }
  }

  applyEvent(event: ApiEvent): void {
    if (event.type === "job-state-changed") {
      const job = event.data.job as unknown as JobInfo;
      const row = this.rows.get(job.device_id);
      if (!row) return;
      if (job.state === "sent") {
        row.device.outstanding_job = job;
      } else {
        row.device.outstanding_job = null;
        if (job.state === "timed_out") {
          row.consecutiveTimeouts += 1;
        } else {
          row.consecutiveTimeouts = 0;
          if (job.latency_s !== null) row.device.last_latency_s = job.latency_s;
        }
      }
      row.presumedDepleted =
        row.device.battery_percent === 0 ||
        row.consecutiveTimeouts >= DEPLETED_AFTER_TIMEOUTS;
    } else if (event.type === "position-ingested") {
      const position = event.data.position as unknown as Position;
      const row = this.rows.get(position.device_id);
      if (!row) return;
      row.device.last_position = position;
      if (position.battery_percent !== null) {
        row.device.battery_percent = position.battery_percent;
        if (position.battery_percent > 0) row.presumedDepleted = false;
      }
    }
  }

  row(deviceId: string): DeviceRow | undefined {
    return this.rows.get(deviceId);
  }

  all(): DeviceRow[] {
    return [...this.rows.values()].sort((a, b) =>
      a.device.device_id < b.device.device_id ? -1 : 1,
    );
  }

  /** Locate-now must be disabled while a job is outstanding (the server
   * would answer 409). */
  canLocate(deviceId: string): boolean {
    const row = this.rows.get(deviceId);
    return !!row && row.device.outstanding_job === null;
  }
}
