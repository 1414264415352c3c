// Schedule editor: kind picker, target picker, activation-window builder
// (time range + weekday toggles), live lifetime estimate, and inline
// rendering of the server's field-level validation errors.

import { ApiClient, ApiError } from "./api.js";
import {
  ScheduleForm,
  WEEKDAYS,
  buildPredictPayload,
  buildSchedulePayload,
  describeLifetime,
  emptyScheduleForm,
  mapServerError,
} from "./schedule.js";
import { Device, Group, Schedule } from "./types.js";

export class ScheduleEditor {
  private container: HTMLElement;
  private api: ApiClient;
  private admin: boolean;
  private form: ScheduleForm = emptyScheduleForm();
  private devices: Device[] = [];
  private groups: Group[] = [];
  private schedules: Schedule[] = [];
  private estimateText = "–";
  private estimateTimer: number | undefined;
  private error: { field: string; message: string } | null = null;
  private onChanged: () => void;

  constructor(container: HTMLElement, api: ApiClient, admin: boolean,
              onChanged: () => void = () => {}) {
    this.container = container;
    this.api = api;
    this.admin = admin;
    this.onChanged = onChanged;
  }

  async refresh(): Promise<void> {
    [this.devices, this.groups, this.schedules] = await Promise.all([
      this.api.listDevices(),
      this.api.listGroups(),
      this.api.listSchedules(),
    ]);
    if (!this.form.targetId && this.devices.length) {
      this.form.targetId = this.devices[0].device_id;
    }
    this.render();
    this.scheduleEstimate();
  }

  private scheduleEstimate(): void {
    if (this.estimateTimer !== undefined) clearTimeout(this.estimateTimer);
    this.estimateTimer = setTimeout(() => void this.updateEstimate(), 300) as unknown as number;
  }

  private async updateEstimate(): Promise<void> {
    let text: string;
    try {
      const payload = buildPredictPayload(this.form);
      const result = await this.api.predictLifetime(payload);
      text = describeLifetime(result.lifetime_minutes);
    } catch (err) {
      text = err instanceof ApiError ? "–" : "–";
    }
    this.estimateText = text;
    const el = this.container.querySelector("#lifetime-estimate");
    if (el) el.textContent = text;
  }

  private async submit(): Promise<void> {
    this.error = null;
    let payload;
    try {
      payload = buildSchedulePayload(this.form);
    } catch (err) {
      this.error = { field: "general", message: (err as Error).message };
      this.render();
      return;
    }
    try {
      await this.api.createSchedule(payload);
      this.form = emptyScheduleForm();
      await this.refresh();
      this.onChanged();
    } catch (err) {
      if (err instanceof ApiError) {
        const mapped = mapServerError(err.detail);
        this.error = mapped;
      } else {
        this.error = { field: "general", message: (err as Error).message };
      }
      this.render();
    }
  }

  render(): void {
    const root = document.createElement("div");
    root.className = "editor";

    if (this.admin) {
      root.appendChild(this.renderForm());
    } else {
      const note = document.createElement("p");
      note.className = "sub";
      note.textContent = "view-only token: schedules are listed below";
      root.appendChild(note);
    }
    root.appendChild(this.renderList());
    this.container.replaceChildren(root);
  }

  private renderForm(): HTMLElement {
    const form = document.createElement("div");
    form.className = "schedule-form";

    form.appendChild(labelled("Kind", select(
      ["interval", "cron", "date"], this.form.kind, (v) => {
        this.form.kind = v as ScheduleForm["kind"];
        this.render();
        this.scheduleEstimate();
      })));

    const targetChoices: Array<[string, string]> = [
      ...this.devices.map((d): [string, string] =>
        [`device:${d.device_id}`, `device ${d.label || d.device_id}`]),
      ...this.groups.map((g): [string, string] =>
        [`group:${g.group_id}`, `group ${g.name}`]),
    ];
    form.appendChild(labelled("Target", selectPairs(
      targetChoices, `${this.form.targetKind}:${this.form.targetId}`, (v) => {
        const [kind, id] = v.split(":");
        this.form.targetKind = kind as "device" | "group";
        this.form.targetId = id;
        this.scheduleEstimate();
      })));

    if (this.form.kind === "interval") {
      const every = numberInput(this.form.everyMinutes, 1, (v) => {
        this.form.everyMinutes = v;
        this.scheduleEstimate();
      });
      form.appendChild(labelled("Every (minutes)", every,
        this.errorFor("every")));
    } else if (this.form.kind === "cron") {
      const cron = textInput(this.form.cron, (v) => {
        this.form.cron = v;
        this.scheduleEstimate();
      });
      cron.placeholder = "minute hour day month weekday";
      form.appendChild(labelled("Cron expression", cron, this.errorFor("cron")));
    } else {
      const at = document.createElement("input");
      at.type = "datetime-local";
      at.value = this.form.at;
      at.oninput = () => {
        this.form.at = at.value;
        this.scheduleEstimate();
      };
      form.appendChild(labelled("Fire at", at, this.errorFor("at")));
    }

    form.appendChild(this.renderWindowBuilder());

    const estimate = document.createElement("div");
    estimate.className = "estimate";
    estimate.innerHTML = `estimated locator lifetime: <b id="lifetime-estimate">${this.estimateText}</b>`;
    form.appendChild(estimate);

    if (this.error && this.error.field === "general") {
      form.appendChild(errorNode(this.error.message));
    }

    const submit = document.createElement("button");
    submit.textContent = "create schedule";
    submit.onclick = () => void this.submit();
    form.appendChild(submit);
    return form;
  }

  private renderWindowBuilder(): HTMLElement {
    const wrap = document.createElement("fieldset");
    wrap.className = "window-builder";
    const legend = document.createElement("legend");
    const toggle = document.createElement("input");
    toggle.type = "checkbox";
    toggle.checked = this.form.window.enabled;
    toggle.onchange = () => {
      this.form.window.enabled = toggle.checked;
      this.render();
      this.scheduleEstimate();
    };
    legend.appendChild(toggle);
    legend.appendChild(document.createTextNode(" activation window"));
    wrap.appendChild(legend);

    if (this.form.window.enabled) {
      const range = document.createElement("div");
      range.className = "window-range";
      const start = timeInput(this.form.window.start, (v) => {
        this.form.window.start = v;
        this.scheduleEstimate();
      });
      const end = timeInput(this.form.window.end, (v) => {
        this.form.window.end = v;
        this.scheduleEstimate();
      });
      range.append("from ", start, " to ", end, " (end exclusive)");
      wrap.appendChild(range);

      const days = document.createElement("div");
      days.className = "weekday-picker";
      for (const day of WEEKDAYS) {
        const button = document.createElement("button");
        button.type = "button";
        button.textContent = day;
        button.className = this.form.window.days.includes(day) ? "day on" : "day";
        button.onclick = () => {
          const set = new Set(this.form.window.days);
          if (set.has(day)) set.delete(day);
          else set.add(day);
          this.form.window.days = WEEKDAYS.filter((d) => set.has(d));
          this.render();
          this.scheduleEstimate();
        };
        days.appendChild(button);
      }
      wrap.appendChild(days);

      const tz = textInput(this.form.window.timezone, (v) => {
        this.form.window.timezone = v;
        this.scheduleEstimate();
      });
      tz.placeholder = "timezone (blank = server default)";
      wrap.appendChild(tz);
      const windowError = this.errorFor("window");
      if (windowError) wrap.appendChild(windowError);
    }
    return wrap;
  }

  private renderList(): HTMLElement {
    const list = document.createElement("table");
    list.className = "schedule-list";
    list.innerHTML = `<thead><tr><th>Schedule</th><th>Target</th><th>Window</th>
      <th>Enabled</th>${this.admin ? "<th></th>" : ""}</tr></thead>`;
    const tbody = document.createElement("tbody");
    for (const schedule of this.schedules) {
      const tr = document.createElement("tr");
      const what = schedule.kind === "interval"
        ? `every ${(schedule.every_s ?? 0) / 60} min`
        : schedule.kind === "cron" ? `cron ${schedule.cron}` : `once at ${schedule.at}`;
      tr.innerHTML = `<td><b>${schedule.schedule_id}</b><div class="sub">${what}</div></td>` +
        `<td>${schedule.target.kind} ${this.targetName(schedule)}</td>` +
        `<td>${windowText(schedule)}</td>`;
      const enabled = document.createElement("td");
      if (this.admin) {
        const toggle = document.createElement("input");
        toggle.type = "checkbox";
        toggle.checked = schedule.enabled;
        toggle.onchange = async () => {
          await this.api.patchSchedule(schedule.schedule_id, { enabled: toggle.checked });
          await this.refresh();
        };
        enabled.appendChild(toggle);
      } else {
        enabled.textContent = schedule.enabled ? "yes" : "no";
      }
      tr.appendChild(enabled);
      if (this.admin) {
        const actions = document.createElement("td");
        const remove = document.createElement("button");
        remove.textContent = "delete";
        remove.className = "danger";
        remove.onclick = async () => {
          await this.api.deleteSchedule(schedule.schedule_id);
          await this.refresh();
        };
        actions.appendChild(remove);
        tr.appendChild(actions);
      }
      tbody.appendChild(tr);
    }
    list.appendChild(tbody);
    return list;
  }

  private targetName(schedule: Schedule): string {
    if (schedule.target.kind === "device") {
      const device = this.devices.find((d) => d.device_id === schedule.target.id);
      return device?.label || schedule.target.id;
    }
    const group = this.groups.find((g) => g.group_id === schedule.target.id);
    return group?.name || schedule.target.id;
  }

  private errorFor(field: string): HTMLElement | null {
    if (this.error && this.error.field === field) {
      return errorNode(this.error.message);
    }
    return null;
  }
}

function windowText(schedule: Schedule): string {
  if (!schedule.window) return "always";
  return `${schedule.window.days.join(",")} ${schedule.window.start}–${schedule.window.end}`;
}

function labelled(text: string, input: HTMLElement, error?: HTMLElement | null): HTMLElement {
  const wrap = document.createElement("label");
  wrap.className = "field";
  const caption = document.createElement("span");
  caption.textContent = text;
  wrap.append(caption, input);
  if (error) wrap.appendChild(error);
  return wrap;
}

function errorNode(message: string): HTMLElement {
  const el = document.createElement("div");
  el.className = "field-error";
  el.textContent = message;
  return el;
}

function select(options: string[], value: string, onChange: (v: string) => void): HTMLElement {
  return selectPairs(options.map((o) => [o, o]), value, onChange);
}

function selectPairs(options: Array<[string, string]>, value: string,
                     onChange: (v: string) => void): HTMLElement {
  const el = document.createElement("select");
  for (const [v, text] of options) {
    const option = document.createElement("option");
    option.value = v;
    option.textContent = text;
    if (v === value) option.selected = true;
    el.appendChild(option);
  }
  el.onchange = () => onChange(el.value);
  return el;
}

function textInput(value: string, onInput: (v: string) => void): HTMLInputElement {
  const el = document.createElement("input");
  el.type = "text";
  el.value = value;
  el.oninput = () => onInput(el.value);
  return el;
}

function timeInput(value: string, onInput: (v: string) => void): HTMLInputElement {
  const el = document.createElement("input");
  el.type = "time";
  el.value = value;
  el.oninput = () => onInput(el.value);
  return el;
}

function numberInput(value: number, min: number, onInput: (v: number) => void): HTMLInputElement {
  const el = document.createElement("input");
  el.type = "number";
  el.min = String(min);
  el.value = String(value);
  el.oninput = () => onInput(Number(el.value));
  return el;
}
