// Interactive event timeline: one marker per event group at its anchor;
// clicking a marker seeks the shared cursor to the anchor and opens the
// aligned-frames panel for the group's packet. Overlapping markers stack
// into one element with a count badge; gap-flagged evidence gets a visual
// low-confidence flag.

import { el } from "./format";
import type { ViewState, ViewStore } from "./state";
import type { EventGroup, EventPacket, EventsDoc } from "./types";

const LAYER_WIDTH = 800;
const STACK_PX = 10;

export class EventLayerView {
  readonly root: HTMLElement;
  private groups: EventGroup[] = [];
  private gapFlaggedGroups = new Set<string>();
  private packetsByGroup = new Map<string, EventPacket>();

  constructor(
    container: HTMLElement,
    private store: ViewStore,
    private onOpenPacket: (packet: EventPacket) => void,
  ) {
    this.root = el("div", "event-layer");
    container.appendChild(this.root);
    this.store.subscribe((state) => this.render(state));
  }

  setData(events: EventsDoc, packets: EventPacket[]): void {
    this.groups = events.groups;
    this.gapFlaggedGroups.clear();
    const flaggedIds = new Set(
      events.candidates.filter((c) => c.gap_flagged).map((c) => c.event_id),
    );
    for (const group of events.groups) {
      if (group.member_ids.some((id) => flaggedIds.has(id))) {
        this.gapFlaggedGroups.add(group.group_id);
      }
    }
    this.packetsByGroup.clear();
    for (const packet of packets) this.packetsByGroup.set(packet.group.group_id, packet);
    this.render(this.store.current);
  }

  private xFor(tMs: number, state: ViewState): number {
    const span = state.windowEndMs - state.windowStartMs;
    if (span <= 0) return 0;
    return ((tMs - state.windowStartMs) / span) * LAYER_WIDTH;
  }

  private render(state: ViewState): void {
    this.root.textContent = "";
    const visible = this.groups
      .filter((g) => g.anchor_ms >= state.windowStartMs && g.anchor_ms <= state.windowEndMs)
      .sort((a, b) => a.anchor_ms - b.anchor_ms || a.group_id.localeCompare(b.group_id));

    // stack markers that land within STACK_PX of each other
    const stacks: EventGroup[][] = [];
    for (const group of visible) {
      const last = stacks[stacks.length - 1];
      if (
        last &&
        Math.abs(this.xFor(group.anchor_ms, state) - this.xFor(last[0].anchor_ms, state)) < STACK_PX
      ) {
        last.push(group);
      } else {
        stacks.push([group]);
      }
    }

    for (const stack of stacks) {
      const lead = stack[0];
      const marker = el("button", "event-marker");
      marker.dataset.groupId = lead.group_id;
      marker.dataset.anchorMs = String(lead.anchor_ms);
      marker.style.left = `${(this.xFor(lead.anchor_ms, state) / LAYER_WIDTH) * 100}%`;
      const discarded = stack.every(
        (g) => this.packetsByGroup.get(g.group_id)?.state === "discarded",
      );
      if (discarded) marker.classList.add("discarded");
      if (stack.some((g) => this.gapFlaggedGroups.has(g.group_id))) {
        marker.classList.add("low-confidence");
        marker.title = "overlaps a flagged gap in the source data";
      }
      if (stack.length > 1) {
        const badge = el("span", "stack-badge", String(stack.length));
        marker.appendChild(badge);
      }
      marker.addEventListener("click", () => this.activate(lead));
      this.root.appendChild(marker);
    }
  }

  private activate(group: EventGroup): void {
    this.store.seek(group.anchor_ms);
    const packet = this.packetsByGroup.get(group.group_id);
    if (packet) {
      this.store.selectPacket(packet.packet_id);
      this.onOpenPacket(packet);
    }
  }
}
