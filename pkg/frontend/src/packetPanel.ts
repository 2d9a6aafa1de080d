// Packet verification controls: verify / discard / restore buttons mapped
// 1:1 to API actions, plus boundary editing through draggable window
// handles. Dragging only updates the pending boundary; SAVE issues exactly
// one edit call, and the lanes re-highlight the boundary returned by the
// API, never the locally dragged one.

import { ApiClient, ApiError } from "./api";
import { el, formatMs } from "./format";
import type { ViewStore } from "./state";
import type { EventPacket, PacketState } from "./types";

const ACTIONS: Record<PacketState, string[]> = {
  candidate: ["verify", "edit", "discard"],
  edited: ["verify", "edit", "discard"],
  verified: [],
  discarded: ["restore"],
};

export class PacketActionsView {
  readonly root: HTMLElement;
  private packet: EventPacket | null = null;
  private pendingBoundary: [number, number] | null = null;
  private dragEdge: "start" | "end" | null = null;
  private mutationInFlight = false;

  constructor(
    container: HTMLElement,
    private api: ApiClient,
    private store: ViewStore,
    private onPacketUpdated: (packet: EventPacket) => void,
  ) {
    this.root = el("div", "packet-panel hidden");
    container.appendChild(this.root);
  }

  show(packet: EventPacket): void {
    this.packet = packet;
    this.pendingBoundary = null;
    this.dragEdge = null;
    this.render();
  }

  hide(): void {
    this.packet = null;
    this.root.classList.add("hidden");
    this.root.textContent = "";
  }

  // -- boundary drag model (pointer handlers call these) -------------------

  beginBoundaryDrag(edge: "start" | "end"): void {
    if (!this.packet) return;
    this.dragEdge = edge;
    this.pendingBoundary = this.pendingBoundary ?? [...this.packet.boundary];
  }

  dragTo(tMs: number): void {
    if (!this.packet || !this.dragEdge || !this.pendingBoundary) return;
    if (this.dragEdge === "start") {
      this.pendingBoundary[0] = Math.min(Math.round(tMs), this.pendingBoundary[1] - 1);
    } else {
      this.pendingBoundary[1] = Math.max(Math.round(tMs), this.pendingBoundary[0] + 1);
    }
    this.renderBoundaryLabel();
  }

  endDrag(): void {
    this.dragEdge = null;
  }

  private render(): void {
    const packet = this.packet;
    if (!packet) return;
    this.root.classList.remove("hidden");
    this.root.textContent = "";
    this.root.appendChild(el("h3", "panel-title", `packet ${packet.packet_id}`));
    const stateChip = el("span", "state-chip", packet.state);
    stateChip.dataset.state = packet.state;
    this.root.appendChild(stateChip);

    const boundaryRow = el("div", "boundary-row");
    const startHandle = el("button", "boundary-handle start", "[");
    const endHandle = el("button", "boundary-handle end", "]");
    const label = el("span", "boundary-label");
    boundaryRow.append(startHandle, label, endHandle);
    this.root.appendChild(boundaryRow);
    this.wireDrag(startHandle, "start");
    this.wireDrag(endHandle, "end");

    const buttons = el("div", "action-buttons");
    const legal = ACTIONS[packet.state];
    for (const action of ["verify", "edit", "discard", "restore"]) {
      const button = el("button", `action ${action}`, action === "edit" ? "save boundary" : action);
      button.dataset.action = action;
      button.disabled =
        this.mutationInFlight ||
        !legal.includes(action) ||
        (action === "edit" && this.pendingBoundary === null);
      button.addEventListener("click", () => void this.runAction(action));
      buttons.appendChild(button);
    }
    this.root.appendChild(buttons);
    this.root.appendChild(el("div", "error-banner hidden"));
    this.renderBoundaryLabel();
  }

  private wireDrag(handle: HTMLElement, edge: "start" | "end"): void {
    handle.addEventListener("pointerdown", () => this.beginBoundaryDrag(edge));
    handle.addEventListener("pointerup", () => this.endDrag());
  }

  private renderBoundaryLabel(): void {
    const label = this.root.querySelector(".boundary-label");
    if (!label || !this.packet) return;
    const shown = this.pendingBoundary ?? this.packet.boundary;
    label.textContent = `${formatMs(shown[0])} - ${formatMs(shown[1])}`;
    (label as HTMLElement).dataset.pending = this.pendingBoundary ? "true" : "false";
    const editButton = this.root.querySelector<HTMLButtonElement>("button.action.edit");
    if (editButton && this.packet.state !== "verified" && this.packet.state !== "discarded") {
      editButton.disabled = this.mutationInFlight || this.pendingBoundary === null;
    }
  }

  private async runAction(action: string): Promise<void> {
    const packet = this.packet;
    const state = this.store.current;
    if (!packet || !state.sessionId || this.mutationInFlight) return;
    this.mutationInFlight = true;
    try {
      const boundary = action === "edit" ? this.pendingBoundary ?? undefined : undefined;
      const updated = await this.api.packetAction(
        state.sessionId,
        packet.packet_id,
        action,
        boundary,
      );
      this.packet = updated;
      this.pendingBoundary = null;
      this.onPacketUpdated(updated); // lanes re-highlight the API's boundary
    } catch (error) {
      this.showError(error);
    } finally {
      this.mutationInFlight = false;
      this.render();
    }
  }

  private showError(error: unknown): void {
    const banner = this.root.querySelector(".error-banner");
    if (!banner) return;
    banner.classList.remove("hidden");
    banner.textContent =
      error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
  }
}
