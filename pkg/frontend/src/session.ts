// Console session: API base, bearer token, and the event-stream resume
// cursor. The cursor only moves forward, so replays after a reconnect can
// never re-deliver an already-seen sequence number.

export interface SessionState {
  baseUrl: string;
  token: string;
  resumeSeq: number;
}

export class ConsoleSession {
  baseUrl: string;
  token: string;
  private seq: number;

  constructor(baseUrl: string, token: string, resumeSeq = 0) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.token = token;
    this.seq = resumeSeq;
  }

  get resumeSeq(): number {
    return this.seq;
  }

  /** Advance the resume cursor; stale/duplicate sequence numbers are ignored. */
  advance(seq: number): boolean {
    if (seq <= this.seq) return false;
    this.seq = seq;
    return true;
  }

  authHeaders(): Record<string, string> {
    return { Authorization: `Bearer ${this.token}` };
  }

  /** URL for the server-push stream, resuming after everything seen so far. */
  eventsUrl(): string {
    return `${this.baseUrl}/events?since=${this.seq}&token=${encodeURIComponent(this.token)}`;
  }

  snapshot(): SessionState {
    return { baseUrl: this.baseUrl, token: this.token, resumeSeq: this.seq };
  }

  static restore(state: SessionState): ConsoleSession {
    return new ConsoleSession(state.baseUrl, state.token, state.resumeSeq);
  }
}
