// Fleet dashboard table: battery, last latency, outstanding-job spinner,
// and a locate-now button that is disabled whenever the server would
// answer 409 (outstanding job) or the token is view-only.

import { ApiClient, ApiError } from "./api.js";
import { FleetModel } from "./fleet.js";

export class Dashboard {
  private container: HTMLElement;
  private model: FleetModel;
  private api: ApiClient;
  private admin: boolean;
  private notice: (text: string) => void;

  constructor(container: HTMLElement, model: FleetModel, api: ApiClient,
              admin: boolean, notice: (text: string) => void) {
    this.container = container;
    this.model = model;
    this.api = api;
    this.admin = admin;
    this.notice = notice;
  }

  render(): void {
    const table = document.createElement("table");
    table.className = "fleet-table";
    table.innerHTML = `<thead><tr>
      <th>Device</th><th>Battery</th><th>Last fix</th><th>Last latency</th>
      <th>Job</th>${this.admin ? "<th></th>" : ""}
    </tr></thead>`;
    const tbody = document.createElement("tbody");

    for (const row of this.model.all()) {
      const d = row.device;
      const tr = document.createElement("tr");

      const name = document.createElement("td");
      name.innerHTML = `<b>${escapeHtml(d.label || d.device_id)}</b>` +
        `<div class="sub">${escapeHtml(d.phone_number)}</div>`;
      tr.appendChild(name);

      const battery = document.createElement("td");
      if (row.presumedDepleted) {
        battery.innerHTML = `<span class="badge badge-depleted">depleted</span>`;
      } else if (d.battery_percent === null) {
        battery.textContent = "–";
      } else {
        battery.innerHTML = batteryGauge(d.battery_percent);
      }
      tr.appendChild(battery);

      const fix = document.createElement("td");
      if (d.last_position) {
        const p = d.last_position;
        fix.innerHTML = `${p.latitude.toFixed(5)}, ${p.longitude.toFixed(5)}` +
          `<div class="sub">${escapeHtml(p.fix_quality)} · ${escapeHtml(p.server_time.slice(0, 19))}</div>`;
      } else {
        fix.textContent = "never";
      }
      tr.appendChild(fix);

      const latency = document.createElement("td");
      latency.textContent = d.last_latency_s === null ? "–" : `${d.last_latency_s.toFixed(1)} s`;
      tr.appendChild(latency);

      const job = document.createElement("td");
      job.innerHTML = d.outstanding_job
        ? `<span class="spinner"></span> waiting`
        : row.consecutiveTimeouts > 0
          ? `<span class="sub">${row.consecutiveTimeouts} timeout(s)</span>`
          : "idle";
      tr.appendChild(job);

      if (this.admin) {
        const actions = document.createElement("td");
        const button = document.createElement("button");
        button.textContent = "locate now";
        button.disabled = !this.model.canLocate(d.device_id);
        button.onclick = async () => {
          button.disabled = true;
          try {
            await this.api.locateNow(d.device_id);
          } catch (err) {
            if (err instanceof ApiError && err.status === 409) {
              this.notice("a locate is already outstanding for this device");
            } else {
              this.notice(`locate failed: ${(err as Error).message}`);
            }
          }
        };
        actions.appendChild(button);
        tr.appendChild(actions);
      }
      tbody.appendChild(tr);
    }
    table.appendChild(tbody);
    this.container.replaceChildren(table);
  }
}

function batteryGauge(percent: number): string {
  const cls = percent <= 15 ? "low" : percent <= 40 ? "mid" : "ok";
  return `<div class="battery"><div class="battery-fill battery-${cls}"` +
    ` style="width:${percent}%"></div></div><span class="sub">${percent}%</span>`;
}

function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (c) =>
    ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;", "'": "&#39;" })[c] as string);
}
