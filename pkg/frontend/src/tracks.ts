// Client-side store of positions per device. Deduplicates by position_id,
// so a track preload racing the live stream (or a stream replay after
// reconnect) can never produce duplicate markers.

import { FixQuality, Position } from "./types.js";

export class TrackStore {
  private byDevice = new Map<string, Position[]>();
  private seen = new Set<string>();

  /** Returns true when the position was new. */
  add(position: Position): boolean {
    if (this.seen.has(position.position_id)) return false;
    this.seen.add(position.position_id);
    const list = this.byDevice.get(position.device_id) ?? [];
    list.push(position);
    // arrivals are near-ordered; keep the invariant strictly
    if (list.length > 1 && list[list.length - 2].server_time > position.server_time) {
      list.sort((a, b) => (a.server_time < b.server_time ? -1 : 1));
    }
    this.byDevice.set(position.device_id, list);
    return true;
  }

  addAll(positions: Position[]): number {
    let added = 0;
    for (const p of positions) if (this.add(p)) added += 1;
    return added;
  }

  positions(deviceId: string): Position[] {
    return this.byDevice.get(deviceId) ?? [];
  }

  devices(): string[] {
    return [...this.byDevice.keys()];
  }

  /** Polyline coordinates: fresh fixes only (stale/salvaged stay points). */
  polyline(deviceId: string): Array<[number, number]> {
    return this.positions(deviceId)
      .filter((p) => p.fix_quality === "fresh")
      .map((p) => [p.longitude, p.latitude]);
  }

  lastPosition(deviceId: string): Position | null {
    const list = this.positions(deviceId);
    return list.length ? list[list.length - 1] : null;
  }

  count(quality?: FixQuality): number {
    let total = 0;
    for (const list of this.byDevice.values()) {
      total += quality ? list.filter((p) => p.fix_quality === quality).length : list.length;
    }
    return total;
  }

  clear(): void {
    this.byDevice.clear();
    this.seen.clear();
  }
}
