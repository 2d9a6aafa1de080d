// Aligned-frames panel: for one packet, the keyframe index per video (as
// served by the API) and the per-stream window pointers, each with a
// jump-to-evidence button that seeks the shared timeline.

import { el, formatMs } from "./format";
import type { ViewStore } from "./state";
import type { EventPacket } from "./types";

export class AlignedFramesPanel {
  readonly root: HTMLElement;

  constructor(container: HTMLElement, private store: ViewStore) {
    this.root = el("div", "aligned-panel hidden");
    container.appendChild(this.root);
  }

  show(packet: EventPacket): void {
    this.root.classList.remove("hidden");
    this.root.textContent = "";
    this.root.appendChild(
      el("h3", "panel-title",
         `event ${packet.packet_id} [${formatMs(packet.boundary[0])} - ${formatMs(packet.boundary[1])}]`),
    );

    const keyframes = el("div", "keyframes");
    for (const kf of packet.keyframes) {
      const cell = el("div", "keyframe", `${kf.video_id}: frame ${kf.frame_index}`);
      cell.dataset.videoId = kf.video_id;
      cell.dataset.frameIndex = String(kf.frame_index);
      keyframes.appendChild(cell);
    }
    this.root.appendChild(keyframes);

    const pointers = el("div", "pointers");
    for (const pointer of packet.pointers) {
      const row = el("div", "pointer-row");
      row.dataset.streamId = pointer.stream_id;
      const label = pointer.ref.out_of_span
        ? `${pointer.stream_id}: out of span`
        : `${pointer.stream_id}: samples [${pointer.ref.start_idx}, ${pointer.ref.end_idx})`;
      row.appendChild(el("span", "pointer-label", label));
      const jump = el("button", "jump-to-evidence", "jump");
      jump.addEventListener("click", () => this.store.seek(pointer.ref.start_ms));
      row.appendChild(jump);
      pointers.appendChild(row);
    }
    this.root.appendChild(pointers);
  }

  hide(): void {
    this.root.classList.add("hidden");
    this.root.textContent = "";
  }
}
