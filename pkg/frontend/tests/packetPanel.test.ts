// [SECONDARY acceptance] verify/edit round trip, packet side: dragging a
// boundary and saving issues exactly one edit API call, and the lanes
// re-highlight the boundary returned by the API.

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { PacketActionsView } from "../src/packetPanel";
import { ViewStore } from "../src/state";
import { TimelineView } from "../src/timeline";
import type { EventPacket } from "../src/types";
import { FakeBackend, SESSION_ID, fixtureIndex, fixturePackets, installBackend } from "./helpers";

describe("PacketActionsView", () => {
  let backend: FakeBackend;
  let store: ViewStore;
  let timeline: TimelineView;
  let panel: PacketActionsView;
  let packets: EventPacket[];

  beforeEach(() => {
    backend = installBackend();
    document.body.innerHTML = "";
    store = new ViewStore();
    const api = new ApiClient();
    timeline = new TimelineView(document.body, api, store, fixtureIndex());
    panel = new PacketActionsView(document.body, api, store, (updated) => {
      packets = packets.map((p) => (p.packet_id === updated.packet_id ? updated : p));
      timeline.setPackets(packets);
    });
    store.openSession(SESSION_ID, 0, 60_000);
    packets = fixturePackets();
    timeline.setPackets(packets);
  });

  async function flush(): Promise<void> {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }

  it("drag + save issues exactly one edit call and lanes re-highlight the API boundary", async () => {
    store.selectPacket("pkt-1");
    panel.show(packets[0]);

    panel.beginBoundaryDrag("start");
    panel.dragTo(9_000);
    panel.endDrag();
    panel.beginBoundaryDrag("end");
    panel.dragTo(15_000);
    panel.endDrag();

    const before = backend.requestsTo("/action").length;
    document.querySelector<HTMLButtonElement>("button.action.edit")!.click();
    await flush();

    const editCalls = backend.requestsTo("/action").slice(before);
    expect(editCalls).toHaveLength(1); // exactly one API call for the whole drag+save
    expect(editCalls[0].body).toMatchObject({ action: "edit", start_ms: 9_000, end_ms: 15_000 });

    const highlight = document.querySelector(".boundary-highlight[visibility='visible']")!;
    expect(highlight.getAttribute("data-start-ms")).toBe("9000");
    expect(highlight.getAttribute("data-end-ms")).toBe("15000");
    expect(document.querySelector(".state-chip")!.textContent).toBe("edited");
  });

  it("save is disabled until a drag produced a pending boundary", () => {
    panel.show(packets[0]);
    const save = document.querySelector<HTMLButtonElement>("button.action.edit")!;
    expect(save.disabled).toBe(true);
    panel.beginBoundaryDrag("end");
    panel.dragTo(20_000);
    panel.endDrag();
    expect(document.querySelector<HTMLButtonElement>("button.action.edit")!.disabled).toBe(false);
  });

  it("verify maps to one API action and disables terminal-state buttons", async () => {
    panel.show(packets[0]);
    document.querySelector<HTMLButtonElement>("button.action.verify")!.click();
    await flush();
    expect(backend.requestsTo("/action")).toHaveLength(1);
    expect(document.querySelector(".state-chip")!.textContent).toBe("verified");
    for (const action of ["verify", "edit", "discard", "restore"]) {
      expect(
        document.querySelector<HTMLButtonElement>(`button.action.${action}`)!.disabled,
      ).toBe(true);
    }
  });

  it("surfaces an API rejection as an error banner", async () => {
    backend.packets[0].state = "verified"; // stale UI state: candidate locally
    panel.show(packets[0]);
    document.querySelector<HTMLButtonElement>("button.action.verify")!.click();
    await flush();
    const banner = document.querySelector(".error-banner")!;
    expect(banner.textContent).toContain("illegal_transition");
  });

  it("discard then restore walks the state machine through the API", async () => {
    panel.show(packets[1]);
    document.querySelector<HTMLButtonElement>("button.action.discard")!.click();
    await flush();
    expect(document.querySelector(".state-chip")!.textContent).toBe("discarded");
    document.querySelector<HTMLButtonElement>("button.action.restore")!.click();
    await flush();
    expect(document.querySelector(".state-chip")!.textContent).toBe("candidate");
    expect(backend.requestsTo("/action")).toHaveLength(2);
  });
});
