// Console entry point: session bootstrap, tab switching, live wiring of the
// event stream into the map, dashboard and schedule views.

import { ApiClient } from "./api.js";
import { Dashboard } from "./dashboard.js";
import { ScheduleEditor } from "./editor.js";
import { EventStreamClient } from "./events.js";
import { FleetModel } from "./fleet.js";
import { MapView } from "./map.js";
import { ConsoleSession } from "./session.js";
import { TrackStore } from "./tracks.js";
import { Position } from "./types.js";

const TRACK_WINDOW_DAYS = 14;

function resolveSession(): ConsoleSession {
  const params = new URLSearchParams(window.location.search);
  const token = params.get("token") ?? localStorage.getItem("smstrack-token") ?? "";
  if (params.get("token")) localStorage.setItem("smstrack-token", token);
  const base = params.get("api") ?? window.location.origin;
  return new ConsoleSession(base, token);
}

async function boot(): Promise<void> {
  const session = resolveSession();
  const api = new ApiClient(session);
  const banner = document.getElementById("banner")!;

  let role: "admin" | "viewer";
  try {
    role = (await api.role()).role;
  } catch {
    banner.textContent = "cannot reach the server or the token is invalid " +
      "(append ?token=<token> to the URL)";
    banner.className = "banner banner-error";
    return;
  }
  const admin = role === "admin";
  document.getElementById("role-badge")!.textContent = role;

  const store = new TrackStore();
  const fleet = new FleetModel();
  const map = new MapView(document.getElementById("map-view")!, store);
  const dashboard = new Dashboard(document.getElementById("fleet-view")!, fleet, api,
    admin, showNotice);
  const editor = new ScheduleEditor(document.getElementById("schedule-view")!, api,
    admin, () => void 0);

  // initial state: fleet snapshot + recent track history per device
  const status = await api.fleetStatus();
  session.advance(status.event_seq);  // stream resumes after this snapshot
  fleet.loadStatus(status);
  const to = new Date(Date.parse(status.server_time) + 60_000).toISOString();
  const from = new Date(Date.parse(status.server_time)
    - TRACK_WINDOW_DAYS * 86_400_000).toISOString();
  for (const device of status.devices) {
    map.setLabel(device.device_id, device.label);
    const track = await api.track(device.device_id, from, to);
    store.addAll(track.positions);
  }
  map.render();
  dashboard.render();
  await editor.refresh();

  let mapDirty = false;
  const stream = new EventStreamClient(session, {
    onEvent(event) {
      fleet.applyEvent(event);
      if (event.type === "position-ingested") {
        const position = event.data.position as unknown as Position;
        if (store.add(position)) mapDirty = true;
      }
      dashboard.render();
    },
    onStatus(state) {
      if (state === "live") {
        banner.textContent = "";
        banner.className = "banner";
      } else {
        banner.textContent = state === "connecting"
          ? "connecting…" : "connection lost — reconnecting…";
        banner.className = "banner banner-warn";
      }
    },
  });
  stream.start();
  setInterval(() => {
    if (mapDirty) {
      mapDirty = false;
      map.render();
    }
  }, 500);

  // tab switching
  const tabs = document.querySelectorAll<HTMLButtonElement>("nav button[data-tab]");
  tabs.forEach((button) => {
    button.onclick = () => {
      tabs.forEach((b) => b.classList.toggle("active", b === button));
      document.querySelectorAll<HTMLElement>(".tab").forEach((panel) => {
        panel.hidden = panel.id !== button.dataset.tab;
      });
    };
  });

  function showNotice(text: string): void {
    banner.textContent = text;
    banner.className = "banner banner-warn";
    setTimeout(() => {
      if (banner.textContent === text) {
        banner.textContent = "";
        banner.className = "banner";
      }
    }, 4000);
  }
}

void boot();
