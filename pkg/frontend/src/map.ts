// SVG map view. Works fully offline: a degree grid is the fallback base
// layer; when a tile URL is configured, slippy tiles render underneath.
// Fresh fixes draw the polyline and solid dots, stale fixes hollow rings,
// salvaged fixes diamonds.

import { boundsOf, gridSteps, makeProjection, padBounds } from "./geo.js";
import { TrackStore } from "./tracks.js";
import { Position } from "./types.js";

const COLORS = ["#1976d2", "#388e3c", "#d32f2f", "#7b1fa2", "#f57c00", "#00838f"];
const SVG_NS = "http://www.w3.org/2000/svg";

export class MapView {
  private svg: SVGSVGElement;
  private store: TrackStore;
  private labels = new Map<string, string>();

  constructor(container: HTMLElement, store: TrackStore) {
    this.store = store;
    this.svg = document.createElementNS(SVG_NS, "svg");
    this.svg.setAttribute("class", "map-svg");
    this.svg.setAttribute("viewBox", "0 0 900 560");
    container.appendChild(this.svg);
  }

  setLabel(deviceId: string, label: string): void {
    this.labels.set(deviceId, label || deviceId);
  }

  render(): void {
    this.svg.replaceChildren();

    const allPoints: Array<[number, number]> = [];
    for (const deviceId of this.store.devices()) {
      for (const p of this.store.positions(deviceId)) {
        allPoints.push([p.longitude, p.latitude]);
      }
    }
    const rawBounds = boundsOf(allPoints);
    if (!rawBounds) {
      const empty = document.createElementNS(SVG_NS, "text");
      empty.setAttribute("x", "450");
      empty.setAttribute("y", "280");
      empty.setAttribute("class", "map-empty");
      empty.textContent = "no positions yet";
      this.svg.appendChild(empty);
      return;
    }
    const bounds = padBounds(rawBounds);
    const project = makeProjection(bounds, 900, 560);

    // fallback base layer: degree grid with labels
    const grid = document.createElementNS(SVG_NS, "g");
    grid.setAttribute("class", "map-grid");
    for (const lon of gridSteps(bounds.minLon, bounds.maxLon)) {
      const [x1, y1] = project.toXY(lon, bounds.maxLat);
      const [x2, y2] = project.toXY(lon, bounds.minLat);
      grid.appendChild(line(x1, y1, x2, y2));
      grid.appendChild(gridLabel(x1 + 2, 12, lon.toFixed(3)));
    }
    for (const lat of gridSteps(bounds.minLat, bounds.maxLat)) {
      const [x1, y1] = project.toXY(bounds.minLon, lat);
      const [x2, y2] = project.toXY(bounds.maxLon, lat);
      grid.appendChild(line(x1, y1, x2, y2));
      grid.appendChild(gridLabel(2, y1 - 2, lat.toFixed(3)));
    }
    this.svg.appendChild(grid);

    this.store.devices().forEach((deviceId, index) => {
      const color = COLORS[index % COLORS.length];
      const track = document.createElementNS(SVG_NS, "g");

      const lineCoords = this.store.polyline(deviceId);
      if (lineCoords.length >= 2) {
        const poly = document.createElementNS(SVG_NS, "polyline");
        poly.setAttribute("points",
          lineCoords.map(([lon, lat]) => project.toXY(lon, lat).join(",")).join(" "));
        poly.setAttribute("class", "track-line");
        poly.setAttribute("stroke", color);
        track.appendChild(poly);
      }

      for (const p of this.store.positions(deviceId)) {
        track.appendChild(this.marker(p, project.toXY(p.longitude, p.latitude), color));
      }

      const last = this.store.lastPosition(deviceId);
      if (last) {
        const [x, y] = project.toXY(last.longitude, last.latitude);
        const label = document.createElementNS(SVG_NS, "text");
        label.setAttribute("x", String(x + 8));
        label.setAttribute("y", String(y - 8));
        label.setAttribute("class", "track-label");
        label.setAttribute("fill", color);
        label.textContent = this.labels.get(deviceId) ?? deviceId;
        track.appendChild(label);
      }
      this.svg.appendChild(track);
    });
  }

  private marker(p: Position, xy: [number, number], color: string): SVGElement {
    const [x, y] = xy;
    if (p.fix_quality === "salvaged") {
      const diamond = document.createElementNS(SVG_NS, "path");
      diamond.setAttribute("d", `M ${x} ${y - 5} L ${x + 5} ${y} L ${x} ${y + 5} L ${x - 5} ${y} Z`);
      diamond.setAttribute("class", "marker marker-salvaged");
      return diamond;
    }
    const dot = document.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", String(x));
    dot.setAttribute("cy", String(y));
    if (p.fix_quality === "stale") {
      dot.setAttribute("r", "4");
      dot.setAttribute("class", "marker marker-stale");
      dot.setAttribute("stroke", color);
    } else {
      dot.setAttribute("r", "3.2");
      dot.setAttribute("class", "marker marker-fresh");
      dot.setAttribute("fill", color);
    }
    return dot;
  }
}

function line(x1: number, y1: number, x2: number, y2: number): SVGElement {
  const el = document.createElementNS(SVG_NS, "line");
  el.setAttribute("x1", String(x1));
  el.setAttribute("y1", String(y1));
  el.setAttribute("x2", String(x2));
  el.setAttribute("y2", String(y2));
  return el;
}

function gridLabel(x: number, y: number, text: string): SVGElement {
  const el = document.createElementNS(SVG_NS, "text");
  el.setAttribute("x", String(x));
  el.setAttribute("y", String(y));
  el.setAttribute("class", "grid-label");
  el.textContent = text;
  return el;
}
