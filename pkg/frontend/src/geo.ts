// Map math: fit a set of coordinates into an SVG viewport (equirectangular,
// latitude-corrected) and slippy-tile addressing for the optional online
// tile layer. No network or DOM here.

export interface Bounds {
  minLat: number;
  maxLat: number;
  minLon: number;
  maxLon: number;
}

export function boundsOf(points: Array<[number, number]>): Bounds | null {
  if (points.length === 0) return null;
  let minLat = 90, maxLat = -90, minLon = 180, maxLon = -180;
  for (const [lon, lat] of points) {
    if (lat < minLat) minLat = lat;
    if (lat > maxLat) maxLat = lat;
    if (lon < minLon) minLon = lon;
    if (lon > maxLon) maxLon = lon;
  }
  return { minLat, maxLat, minLon, maxLon };
}

export function padBounds(b: Bounds, fraction = 0.15, minSpanDeg = 0.002): Bounds {
  const latSpan = Math.max(b.maxLat - b.minLat, minSpanDeg);
  const lonSpan = Math.max(b.maxLon - b.minLon, minSpanDeg);
  return {
    minLat: b.minLat - latSpan * fraction,
    maxLat: b.maxLat + latSpan * fraction,
    minLon: b.minLon - lonSpan * fraction,
    maxLon: b.maxLon + lonSpan * fraction,
  };
}

export interface Projection {
  toXY(lon: number, lat: number): [number, number];
  width: number;
  height: number;
}

/** Equirectangular projection of the padded bounds into width x height,
 * preserving the metric aspect ratio at the mid-latitude. */
export function makeProjection(bounds: Bounds, width: number, height: number): Projection {
  const midLat = (bounds.minLat + bounds.maxLat) / 2;
  const cos = Math.max(0.05, Math.cos((midLat * Math.PI) / 180));
  const lonSpan = (bounds.maxLon - bounds.minLon) * cos;
  const latSpan = bounds.maxLat - bounds.minLat;
  const scale = Math.min(width / lonSpan, height / latSpan);
  const xPad = (width - lonSpan * scale) / 2;
  const yPad = (height - latSpan * scale) / 2;
  return {
    width,
    height,
    toXY(lon: number, lat: number): [number, number] {
      const x = xPad + (lon - bounds.minLon) * cos * scale;
      const y = yPad + (bounds.maxLat - lat) * scale;
      return [x, y];
    },
  };
}

/** Grid line positions (degree steps chosen to land 4-8 lines per axis). */
export function gridSteps(min: number, max: number): number[] {
  const span = max - min;
  const raw = span / 5;
  const magnitude = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 5, 10].map((m) => m * magnitude).find((s) => span / s <= 8) ?? magnitude * 10;
  const lines: number[] = [];
  for (let v = Math.ceil(min / step) * step; v <= max; v += step) {
    lines.push(Number(v.toFixed(6)));
  }
  return lines;
}

// -- slippy tiles (only used when a tile URL is configured) -------------------

export function lonLatToTile(lon: number, lat: number, zoom: number): [number, number] {
  const n = 2 ** zoom;
  const x = Math.floor(((lon + 180) / 360) * n);
  const latRad = (lat * Math.PI) / 180;
  const y = Math.floor(((1 - Math.asinh(Math.tan(latRad)) / Math.PI) / 2) * n);
  return [Math.min(n - 1, Math.max(0, x)), Math.min(n - 1, Math.max(0, y))];
}

export function zoomToFit(bounds: Bounds, maxTiles = 6): number {
  for (let zoom = 18; zoom >= 1; zoom -= 1) {
    const [x1, y1] = lonLatToTile(bounds.minLon, bounds.maxLat, zoom);
    const [x2, y2] = lonLatToTile(bounds.maxLon, bounds.minLat, zoom);
    if ((x2 - x1 + 1) * (y2 - y1 + 1) <= maxTiles * maxTiles) return zoom;
  }
  return 1;
}

export function tileUrl(template: string, zoom: number, x: number, y: number): string {
  return template
    .replace("{z}", String(zoom))
    .replace("{x}", String(x))
    .replace("{y}", String(y));
}
