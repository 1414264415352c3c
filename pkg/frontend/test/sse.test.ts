import { describe, expect, it } from "vitest";

import { extractFrames, parseFrame } from "../src/sse.js";

describe("extractFrames", () => {
  it("splits complete frames and keeps the remainder", () => {
    const { frames, rest } = extractFrames("a: 1\n\nb: 2\n\npartial");
    expect(frames).toEqual(["a: 1", "b: 2"]);
    expect(rest).toBe("partial");
  });

  it("handles buffers with no complete frame", () => {
    const { frames, rest } = extractFrames("id: 4\ndata: {");
    expect(frames).toEqual([]);
    expect(rest).toBe("id: 4\ndata: {");
  });

  it("handles chunk boundaries inside the frame separator", () => {
    let buffer = "id: 1\ndata: x\n";
    let out = extractFrames(buffer);
    expect(out.frames).toEqual([]);
    buffer = out.rest + "\nid: 2\ndata: y\n\n";
    out = extractFrames(buffer);
    expect(out.frames).toEqual(["id: 1\ndata: x", "id: 2\ndata: y"]);
    expect(out.rest).toBe("");
  });
});

describe("parseFrame", () => {
  it("parses id, event and data fields", () => {
    const frame = parseFrame('id: 42\nevent: position-ingested\ndata: {"seq": 42}');
    expect(frame).toEqual({
      id: 42,
      event: "position-ingested",
      data: '{"seq": 42}',
    });
  });

  it("ignores comment frames", () => {
    expect(parseFrame(": connected")).toBeNull();
  });

  it("joins multi-line data", () => {
    const frame = parseFrame("data: line1\ndata: line2");
    expect(frame?.data).toBe("line1\nline2");
  });
});
