import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { ViewStore } from "../src/state";
import { TILES_PER_LANE, TimelineView, bucketForWindow } from "../src/timeline";
import { FakeBackend, SESSION_ID, fixtureIndex, fixturePackets, installBackend } from "./helpers";

describe("TimelineView", () => {
  let backend: FakeBackend;
  let store: ViewStore;
  let view: TimelineView;

  beforeEach(() => {
    backend = installBackend();
    document.body.innerHTML = "";
    store = new ViewStore();
    view = new TimelineView(document.body, new ApiClient(), store, fixtureIndex());
  });

  it("renders one lane per stream plus one per video", () => {
    expect(document.querySelectorAll(".stream-lane")).toHaveLength(2);
    expect(document.querySelectorAll(".video-lane")).toHaveLength(2);
  });

  it("fetches envelope tiles for the visible window", async () => {
    store.openSession(SESSION_ID, 0, 60_000);
    await view.settled();
    const tiles = document.querySelectorAll(".stream-lane .tile");
    expect(tiles.length).toBeGreaterThan(0);
    const calls = backend.requestsTo("/envelope");
    expect(calls).toHaveLength(2); // one per stream lane
    expect(calls[0].url).toContain(`bucket_ms=${bucketForWindow(0, 60_000)}`);
  });

  it("zooming in 2x halves bucket_ms in the tile request", async () => {
    store.openSession(SESSION_ID, 0, 60_000);
    await view.settled();
    const before = backend.requestsTo("/envelope").at(-1)!;
    const bucketBefore = Number(new URL(before.url, "http://x").searchParams.get("bucket_ms"));

    store.seek(30_000);
    store.zoomBy(2);
    await view.settled();
    const after = backend.requestsTo("/envelope").at(-1)!;
    const bucketAfter = Number(new URL(after.url, "http://x").searchParams.get("bucket_ms"));
    expect(bucketAfter).toBe(bucketBefore / 2);
    expect(bucketBefore).toBe(Math.floor(60_000 / TILES_PER_LANE));
  });

  it("all lanes share the cursor position", async () => {
    store.openSession(SESSION_ID, 0, 60_000);
    await view.settled();
    store.seek(42_000);
    const cursorMarks = [
      ...document.querySelectorAll(".stream-lane .cursor"),
      ...document.querySelectorAll(".video-lane .video-cursor"),
    ];
    expect(cursorMarks).toHaveLength(4);
    const reported = cursorMarks.map(
      (node) => (node as HTMLElement).getAttribute("data-cursor-ms") ??
                (node as HTMLElement).dataset?.cursorMs,
    );
    expect(new Set(reported)).toEqual(new Set(["42000"]));
  });

  it("highlights the selected packet boundary in every stream lane", async () => {
    store.openSession(SESSION_ID, 0, 60_000);
    await view.settled();
    const packets = fixturePackets();
    view.setPackets(packets);
    store.selectPacket(packets[0].packet_id);
    const highlights = document.querySelectorAll(".boundary-highlight[visibility='visible']");
    expect(highlights).toHaveLength(2);
    highlights.forEach((h) => {
      expect(h.getAttribute("data-start-ms")).toBe(String(packets[0].boundary[0]));
      expect(h.getAttribute("data-end-ms")).toBe(String(packets[0].boundary[1]));
    });
  });

  it("video lanes show frame-number thumbnails", async () => {
    store.openSession(SESSION_ID, 0, 60_000);
    await view.settled();
    const thumbs = document.querySelectorAll(".video-lane .thumb");
    expect(thumbs.length).toBeGreaterThan(0);
    const frame = Number((thumbs[0] as HTMLElement).dataset.frame);
    expect(frame).toBeGreaterThanOrEqual(0);
    expect(frame).toBeLessThan(1800);
  });
});
