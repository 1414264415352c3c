import { describe, expect, it } from "vitest";

import { ConsoleSession } from "../src/session.js";

describe("ConsoleSession", () => {
  it("advances the resume cursor monotonically", () => {
    const session = new ConsoleSession("http://x", "t");
    expect(session.advance(1)).toBe(true);
    expect(session.advance(2)).toBe(true);
    expect(session.advance(2)).toBe(false); // duplicate
    expect(session.advance(1)).toBe(false); // replay
    expect(session.resumeSeq).toBe(2);
  });

  it("builds the events url from the cursor", () => {
    const session = new ConsoleSession("http://x/", "secret");
    session.advance(41);
    expect(session.eventsUrl()).toBe("http://x/events?since=41&token=secret");
  });

  it("survives a snapshot/restore round trip", () => {
    const session = new ConsoleSession("http://x", "t", 7);
    session.advance(9);
    const restored = ConsoleSession.restore(session.snapshot());
    expect(restored.resumeSeq).toBe(9);
    expect(restored.advance(9)).toBe(false);
    expect(restored.advance(10)).toBe(true);
  });
});
