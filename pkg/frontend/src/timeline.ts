// Synchronized multimodal timeline: one SVG lane per stream (envelope tiles
// fetched from the API at a zoom-dependent bucket), one lane per video
// (thumbnail strip), a shared cursor across all lanes, and a boundary
// highlight for the selected packet.

import { ApiClient } from "./api";
import { el, formatMs, svgEl } from "./format";
import type { ViewState, ViewStore } from "./state";
import type { AlignmentIndex, EventPacket, StreamIndexEntry, VideoIndexEntry } from "./types";

export const TILES_PER_LANE = 200;
export const LANE_WIDTH = 800;
export const LANE_HEIGHT = 48;
const THUMBS_PER_LANE = 8;

export function bucketForWindow(startMs: number, endMs: number): number {
  return Math.max(1, Math.floor((endMs - startMs) / TILES_PER_LANE));
}

interface StreamLane {
  entry: StreamIndexEntry;
  svg: SVGSVGElement;
  tiles: SVGGElement;
  highlight: SVGRectElement;
  cursor: SVGLineElement;
}

interface VideoLane {
  entry: VideoIndexEntry;
  element: HTMLElement;
  strip: HTMLElement;
  cursor: HTMLElement;
}

export class TimelineView {
  readonly root: HTMLElement;
  private streamLanes: StreamLane[] = [];
  private videoLanes: VideoLane[] = [];
  private packets: EventPacket[] = [];
  private lastWindow: [number, number] | null = null;
  private inflight: Promise<void> = Promise.resolve();

  constructor(
    container: HTMLElement,
    private api: ApiClient,
    private store: ViewStore,
    private index: AlignmentIndex,
  ) {
    this.root = el("div", "timeline");
    container.appendChild(this.root);
    for (const entry of this.index.streams) this.addStreamLane(entry);
    for (const entry of this.index.videos) this.addVideoLane(entry);
    this.store.subscribe((state) => this.onState(state));
  }

  /** Resolves when all pending tile fetches have been applied. */
  settled(): Promise<void> {
    return this.inflight;
  }

  setPackets(packets: EventPacket[]): void {
    this.packets = packets;
    this.renderOverlay(this.store.current);
  }

  private addStreamLane(entry: StreamIndexEntry): void {
    const lane = el("div", "lane stream-lane");
    lane.dataset.streamId = entry.stream_id;
    lane.appendChild(el("span", "lane-label", `${entry.stream_id} (${entry.modality_kind})`));
    const svg = svgEl("svg", {
      viewBox: `0 0 ${LANE_WIDTH} ${LANE_HEIGHT}`,
      width: LANE_WIDTH,
      height: LANE_HEIGHT,
      class: "lane-svg",
    });
    const tiles = svgEl("g", { class: "tiles" });
    const highlight = svgEl("rect", {
      class: "boundary-highlight",
      y: 0,
      height: LANE_HEIGHT,
      width: 0,
      x: 0,
      visibility: "hidden",
    });
    const cursor = svgEl("line", { class: "cursor", y1: 0, y2: LANE_HEIGHT });
    svg.append(tiles, highlight, cursor);
    svg.addEventListener("click", (event) => this.seekFromClick(event));
    lane.appendChild(svg);
    this.root.appendChild(lane);
    this.streamLanes.push({ entry, svg, tiles, highlight, cursor });
  }

  private addVideoLane(entry: VideoIndexEntry): void {
    const lane = el("div", "lane video-lane");
    lane.dataset.videoId = entry.video_id;
    lane.appendChild(el("span", "lane-label", `${entry.video_id} (${entry.kind})`));
    const strip = el("div", "thumb-strip");
    const cursor = el("div", "cursor video-cursor");
    lane.append(strip, cursor);
    this.root.appendChild(lane);
    this.videoLanes.push({ entry, element: lane, strip, cursor });
  }

  private seekFromClick(event: MouseEvent): void {
    const state = this.store.current;
    const target = event.currentTarget as SVGSVGElement;
    const rect = target.getBoundingClientRect();
    const width = rect.width || LANE_WIDTH;
    const frac = Math.min(1, Math.max(0, (event.clientX - rect.left) / width));
    this.store.seek(Math.round(state.windowStartMs + frac * (state.windowEndMs - state.windowStartMs)));
  }

  private xFor(tMs: number, state: ViewState): number {
    const span = state.windowEndMs - state.windowStartMs;
    if (span <= 0) return 0;
    return ((tMs - state.windowStartMs) / span) * LANE_WIDTH;
  }

  private onState(state: ViewState): void {
    const windowChanged =
      this.lastWindow === null ||
      this.lastWindow[0] !== state.windowStartMs ||
      this.lastWindow[1] !== state.windowEndMs;
    this.lastWindow = [state.windowStartMs, state.windowEndMs];
    this.renderOverlay(state);
    if (windowChanged && state.sessionId) {
      const job = this.fetchTiles(state);
      this.inflight = this.inflight.then(() => job);
    }
  }

  /** Cursor lines and boundary highlights; synchronous, no fetches. */
  private renderOverlay(state: ViewState): void {
    const x = this.xFor(state.cursorMs, state);
    const selected = this.packets.find((p) => p.packet_id === state.selectedPacketId) ?? null;
    for (const lane of this.streamLanes) {
      lane.cursor.setAttribute("x1", String(x));
      lane.cursor.setAttribute("x2", String(x));
      lane.cursor.setAttribute("data-cursor-ms", String(state.cursorMs));
      if (selected) {
        const x0 = this.xFor(selected.boundary[0], state);
        const x1 = this.xFor(selected.boundary[1], state);
        lane.highlight.setAttribute("x", String(Math.min(x0, x1)));
        lane.highlight.setAttribute("width", String(Math.abs(x1 - x0)));
        lane.highlight.setAttribute("visibility", "visible");
        lane.highlight.setAttribute("data-start-ms", String(selected.boundary[0]));
        lane.highlight.setAttribute("data-end-ms", String(selected.boundary[1]));
      } else {
        lane.highlight.setAttribute("visibility", "hidden");
      }
    }
    for (const lane of this.videoLanes) {
      lane.cursor.style.left = `${(x / LANE_WIDTH) * 100}%`;
      lane.cursor.dataset.cursorMs = String(state.cursorMs);
      this.renderThumbs(lane, state);
    }
  }

  private renderThumbs(lane: VideoLane, state: ViewState): void {
    lane.strip.textContent = "";
    const span = state.windowEndMs - state.windowStartMs;
    for (let k = 0; k < THUMBS_PER_LANE; k++) {
      const t = state.windowStartMs + ((k + 0.5) / THUMBS_PER_LANE) * span;
      const raw = Math.floor(((t - lane.entry.offset_ms) * lane.entry.fps) / 1000);
      const frame = Math.max(0, Math.min(lane.entry.frame_count - 1, raw));
      const thumb = el("div", "thumb", `#${frame}`);
      thumb.dataset.frame = String(frame);
      thumb.title = `${lane.entry.video_id} frame ${frame} @ ${formatMs(t)}`;
      lane.strip.appendChild(thumb);
    }
  }

  private async fetchTiles(state: ViewState): Promise<void> {
    if (!state.sessionId) return;
    const bucket = bucketForWindow(state.windowStartMs, state.windowEndMs);
    await Promise.all(
      this.streamLanes.map(async (lane) => {
        const channel = await this.laneChannel(state.sessionId!, lane);
        if (channel === null) return;
        const body = await this.api.getEnvelope(
          state.sessionId!,
          lane.entry.stream_id,
          channel,
          state.windowStartMs,
          state.windowEndMs,
          bucket,
        );
        this.renderTiles(lane, state, body.tiles, bucket);
      }),
    ).catch(() => undefined); // lane fetch failures leave stale tiles visible
  }

  private channelCache = new Map<string, string>();

  private async laneChannel(sid: string, lane: StreamLane): Promise<string | null> {
    const cached = this.channelCache.get(lane.entry.stream_id);
    if (cached) return cached;
    // a zero-width samples probe reports the stream's channel names;
    // the first channel is the lane's plotted channel
    const probe = await this.api.getSamples(
      sid, lane.entry.stream_id, lane.entry.offset_ms, lane.entry.offset_ms,
    );
    if (!probe.channels.length) return null;
    const channel = probe.channels[0];
    this.channelCache.set(lane.entry.stream_id, channel);
    return channel;
  }

  private renderTiles(
    lane: StreamLane,
    state: ViewState,
    tiles: [number, number, number][],
    bucketMs: number,
  ): void {
    lane.tiles.textContent = "";
    if (!tiles.length) return;
    let lo = Infinity;
    let hi = -Infinity;
    for (const [, mn, mx] of tiles) {
      lo = Math.min(lo, mn);
      hi = Math.max(hi, mx);
    }
    if (lo === hi) {
      lo -= 0.5;
      hi += 0.5;
    }
    const yFor = (v: number) => (1 - (v - lo) / (hi - lo)) * (LANE_HEIGHT - 2) + 1;
    for (const [t, mn, mx] of tiles) {
      const x = this.xFor(t, state);
      const width = Math.max(1, this.xFor(t + bucketMs, state) - x);
      const yTop = yFor(mx);
      const rect = svgEl("rect", {
        class: "tile",
        x,
        width,
        y: yTop,
        height: Math.max(1, yFor(mn) - yTop),
      });
      rect.setAttribute("data-t-ms", String(t));
      lane.tiles.appendChild(rect);
    }
  }
}

