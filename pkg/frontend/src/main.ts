// Workbench bootstrap: session list, synchronized timeline, event layer,
// and the packet / aligned-frames / annotation panels, all wired to one
// shared ViewStore and one ApiClient.

import { AlignedFramesPanel } from "./alignedPanel";
import { AnnotationEditorView } from "./annotationPanel";
import { ApiClient } from "./api";
import { EventLayerView } from "./eventLayer";
import { el, formatMs } from "./format";
import { JobPoller } from "./jobs";
import { PacketActionsView } from "./packetPanel";
import { ViewStore } from "./state";
import { TimelineView } from "./timeline";
import type { AnnotationRecord, EventPacket } from "./types";

export class Workbench {
  readonly store = new ViewStore();
  private timeline: TimelineView | null = null;
  private eventLayer: EventLayerView | null = null;
  private alignedPanel: AlignedFramesPanel;
  private packetPanel: PacketActionsView;
  private annotationPanel: AnnotationEditorView;
  private poller: JobPoller;
  private packets: EventPacket[] = [];
  private annotations: AnnotationRecord[] = [];

  private sessionList: HTMLElement;
  private lanesHost: HTMLElement;
  private layerHost: HTMLElement;
  private statusBar: HTMLElement;

  constructor(root: HTMLElement, private api: ApiClient = new ApiClient()) {
    const sidebar = el("div", "sidebar");
    this.sessionList = el("ul", "session-list");
    sidebar.append(el("h2", "", "sessions"), this.sessionList);

    const center = el("div", "center");
    this.layerHost = el("div", "layer-host");
    this.lanesHost = el("div", "lanes-host");
    this.statusBar = el("div", "status-bar");
    const zoomIn = el("button", "zoom-in", "+");
    const zoomOut = el("button", "zoom-out", "-");
    zoomIn.addEventListener("click", () => this.store.zoomBy(2));
    zoomOut.addEventListener("click", () => this.store.zoomBy(0.5));
    center.append(this.layerHost, this.lanesHost, el("div", "zoom-controls"), this.statusBar);
    center.querySelector(".zoom-controls")!.append(zoomOut, zoomIn);

    const right = el("div", "right-panels");
    this.alignedPanel = new AlignedFramesPanel(right, this.store);
    this.packetPanel = new PacketActionsView(right, this.api, this.store, (p) =>
      this.packetUpdated(p),
    );
    this.annotationPanel = new AnnotationEditorView(right, this.api, this.store, (r) =>
      this.annotationUpdated(r),
    );

    root.append(sidebar, center, right);
    this.poller = new JobPoller(this.api, this.store, () => void this.reloadAnnotations());
    this.store.subscribe((state) => {
      this.statusBar.textContent =
        `cursor ${formatMs(state.cursorMs)}  window ` +
        `[${formatMs(state.windowStartMs)} - ${formatMs(state.windowEndMs)}]` +
        (state.pendingJobs.length ? `  (${state.pendingJobs.length} jobs pending)` : "");
    });
  }

  async start(): Promise<void> {
    const sessions = await this.api.listSessions();
    this.sessionList.textContent = "";
    for (const meta of sessions) {
      const item = el("li", "session-item",
                      `${meta.participant_id} / ${meta.scene_id} / ${meta.session_id}`);
      item.dataset.sessionId = meta.session_id;
      item.addEventListener("click", () => void this.openSession(meta.session_id));
      this.sessionList.appendChild(item);
    }
  }

  async openSession(sessionId: string): Promise<void> {
    const index = await this.api.getIndex(sessionId);
    this.lanesHost.textContent = "";
    this.layerHost.textContent = "";
    this.alignedPanel.hide();
    this.packetPanel.hide();
    this.annotationPanel.hide();

    this.timeline = new TimelineView(this.lanesHost, this.api, this.store, index);
    this.eventLayer = new EventLayerView(this.layerHost, this.store, (packet) =>
      this.openPacket(packet),
    );
    this.store.openSession(sessionId, index.t0_ms, index.t1_ms);

    const [events, packetsDoc] = await Promise.all([
      this.api.getEvents(sessionId),
      this.api.getPackets(sessionId),
    ]);
    this.packets = packetsDoc.packets;
    this.eventLayer.setData(events, this.packets);
    this.timeline.setPackets(this.packets);
    await this.reloadAnnotations();
  }

  private async reloadAnnotations(): Promise<void> {
    const state = this.store.current;
    if (!state.sessionId) return;
    try {
      const doc = await this.api.getAnnotations(state.sessionId);
      this.annotations = doc.annotations;
    } catch {
      this.annotations = []; // session not annotated yet
    }
    const selected = this.annotations.find(
      (a) => a.annotation_id === state.selectedAnnotationId,
    );
    if (selected) this.annotationPanel.show(selected);
  }

  openPacket(packet: EventPacket): void {
    this.alignedPanel.show(packet);
    this.packetPanel.show(packet);
    const annotation = this.annotations.find((a) => a.packet_id === packet.packet_id);
    if (annotation) {
      this.store.selectAnnotation(annotation.annotation_id);
      this.annotationPanel.show(annotation);
    } else {
      this.annotationPanel.hide();
    }
  }

  requestAnnotation(packet: EventPacket): void {
    const state = this.store.current;
    if (!state.sessionId) return;
    void this.api
      .triggerAnnotation(state.sessionId, packet.packet_id)
      .then((job) => this.poller.track(job.job_id));
  }

  private packetUpdated(packet: EventPacket): void {
    this.packets = this.packets.map((p) => (p.packet_id === packet.packet_id ? packet : p));
    this.timeline?.setPackets(this.packets);
    this.alignedPanel.show(packet);
  }

  private annotationUpdated(record: AnnotationRecord): void {
    this.annotations = this.annotations.map((a) =>
      a.annotation_id === record.annotation_id ? record : a,
    );
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const workbench = new Workbench(document.getElementById("app")!);
  void workbench.start();
}
