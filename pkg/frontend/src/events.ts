// Event stream client with automatic resume. On any drop it reconnects
// from the session's cursor, so no event is missed or delivered twice.

import { ConsoleSession } from "./session.js";
import { extractFrames, parseFrame } from "./sse.js";
import { ApiEvent } from "./types.js";

export type StreamStatus = "connecting" | "live" | "reconnecting";

export interface StreamHandlers {
  onEvent: (event: ApiEvent) => void;
  onStatus?: (status: StreamStatus) => void;
}

export class EventStreamClient {
  private session: ConsoleSession;
  private handlers: StreamHandlers;
  private stopped = false;
  private retryMs = 500;

  constructor(session: ConsoleSession, handlers: StreamHandlers) {
    this.session = session;
    this.handlers = handlers;
  }

  start(): void {
    this.stopped = false;
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
  }

  private setStatus(status: StreamStatus): void {
    this.handlers.onStatus?.(status);
  }

  private async loop(): Promise<void> {
    this.setStatus("connecting");
    while (!this.stopped) {
      try {
        const resp = await fetch(this.session.eventsUrl(), {
          headers: { Accept: "text/event-stream" },
        });
        if (!resp.ok || !resp.body) throw new Error(`stream HTTP ${resp.status}`);
        this.setStatus("live");
        this.retryMs = 500;
        await this.consume(resp.body);
      } catch {
        // fall through to reconnect
      }
      if (this.stopped) return;
      this.setStatus("reconnecting");
      await sleep(this.retryMs);
      this.retryMs = Math.min(this.retryMs * 2, 10_000);
    }
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done || this.stopped) return;
      buffer += decoder.decode(value, { stream: true });
      const { frames, rest } = extractFrames(buffer);
      buffer = rest;
      for (const raw of frames) {
        const frame = parseFrame(raw);
        if (!frame || !frame.data) continue;
        const event = JSON.parse(frame.data) as ApiEvent;
        // the cursor is the dedupe gate: replayed frames are dropped here
        if (this.session.advance(event.seq)) {
          this.handlers.onEvent(event);
        }
      }
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
