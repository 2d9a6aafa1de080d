import { beforeEach, describe, expect, it } from "vitest";

import { ViewStore } from "../src/state";

describe("ViewStore invariants", () => {
  let store: ViewStore;

  beforeEach(() => {
    store = new ViewStore();
    store.openSession("S", 0, 60_000);
  });

  it("opens with the window covering the session span", () => {
    const s = store.current;
    expect([s.windowStartMs, s.windowEndMs]).toEqual([0, 60_000]);
    expect(s.cursorMs).toBe(0);
  });

  it("keeps the visible window inside the session span", () => {
    store.setWindow(-5_000, 10_000);
    expect(store.current.windowStartMs).toBe(0);
    store.setWindow(55_000, 90_000);
    const s = store.current;
    expect(s.windowEndMs).toBeLessThanOrEqual(60_000);
    expect(s.windowStartMs).toBeGreaterThanOrEqual(0);
  });

  it("keeps the cursor inside the visible window after any seek", () => {
    store.setWindow(10_000, 20_000);
    store.seek(12_345);
    expect(store.current.cursorMs).toBe(12_345);
    store.seek(59_000); // outside: window recenters, cursor lands inside
    const s = store.current;
    expect(s.cursorMs).toBe(59_000);
    expect(s.cursorMs).toBeGreaterThanOrEqual(s.windowStartMs);
    expect(s.cursorMs).toBeLessThanOrEqual(s.windowEndMs);
  });

  it("zooming by 2 halves the window around the cursor", () => {
    store.setWindow(0, 40_000);
    store.seek(20_000);
    store.zoomBy(2);
    const s = store.current;
    expect(s.windowEndMs - s.windowStartMs).toBe(20_000);
    expect(s.cursorMs).toBe(20_000);
  });

  it("notifies subscribers with snapshots", () => {
    const seen: number[] = [];
    const unsubscribe = store.subscribe((s) => seen.push(s.cursorMs));
    store.seek(5_000);
    unsubscribe();
    store.seek(9_000);
    expect(seen).toEqual([5_000]);
  });

  it("tracks pending jobs", () => {
    store.jobStarted("j1");
    store.jobStarted("j2");
    expect(store.current.pendingJobs).toEqual(["j1", "j2"]);
    store.jobFinished("j1");
    expect(store.current.pendingJobs).toEqual(["j2"]);
  });
});
