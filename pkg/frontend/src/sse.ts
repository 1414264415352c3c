// Minimal server-sent-events frame handling over a streamed fetch body.
// Kept DOM-free so the parser is unit-testable.

export interface SseFrame {
  id: number | null;
  event: string | null;
  data: string;
}

/** Split a stream chunk buffer into complete frames; returns the remainder. */
export function extractFrames(buffer: string): { frames: string[]; rest: string } {
  const frames: string[] = [];
  let rest = buffer;
  let idx;
  while ((idx = rest.indexOf("\n\n")) >= 0) {
    frames.push(rest.slice(0, idx));
    rest = rest.slice(idx + 2);
  }
  return { frames, rest };
}

/** Parse one raw frame; comment-only frames yield null. */
export function parseFrame(raw: string): SseFrame | null {
  let id: number | null = null;
  let event: string | null = null;
  const data: string[] = [];
  for (const line of raw.split("\n")) {
    if (!line || line.startsWith(":")) continue;
    const sep = line.indexOf(": ");
    if (sep < 0) continue;
    const field = line.slice(0, sep);
    const value = line.slice(sep + 2);
    if (field === "id") id = Number(value);
    else if (field === "event") event = value;
    else if (field === "data") data.push(value);
  }
  if (id === null && event === null && data.length === 0) return null;
  return { id, event, data: data.join("\n") };
}
