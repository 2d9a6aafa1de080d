// Test harness: an in-memory backend that speaks the API contract over a
// stubbed fetch, with every request recorded so tests can assert the
// "one user action, one API call" invariant.

import type {
  AlignmentIndex,
  AnnotationRecord,
  EventPacket,
  EventsDoc,
  Job,
  SessionMeta,
} from "../src/types";

export const SESSION_ID = "S01-P01-forest";

export interface RecordedRequest {
  method: string;
  url: string;
  body: unknown;
}

export function fixtureSession(): SessionMeta {
  return {
    session_id: SESSION_ID,
    participant_id: "P01",
    scene_id: "forest",
    recording_epoch_ms: 1_700_000_000_000,
    stream_manifest: [
      { stream_id: "au", modality_kind: "au", declared_rate_hz: 10, source_path: "raw/au.csv" },
      { stream_id: "eda", modality_kind: "eda", declared_rate_hz: 4, source_path: "raw/eda.csv" },
    ],
    video_manifest: [
      { video_id: "face-cam", uri: "media/face.mp4", fps: 30, frame_count: 1800,
        offset_ms: 0, kind: "face_avatar", source_stream_id: null },
      { video_id: "fpv-cam", uri: "media/fpv.mp4", fps: 30, frame_count: 1800,
        offset_ms: 0, kind: "first_person", source_stream_id: null },
    ],
  };
}

export function fixtureIndex(): AlignmentIndex {
  return {
    session_id: SESSION_ID,
    t0_ms: 0,
    t1_ms: 60_000,
    streams: [
      { stream_id: "au", modality_kind: "au", offset_ms: 0, rate_hz: 10, sample_count: 600 },
      { stream_id: "eda", modality_kind: "eda", offset_ms: 0, rate_hz: 4, sample_count: 240 },
    ],
    videos: [
      { video_id: "face-cam", kind: "face_avatar", uri: "media/face.mp4",
        offset_ms: 0, fps: 30, frame_count: 1800 },
      { video_id: "fpv-cam", kind: "first_person", uri: "media/fpv.mp4",
        offset_ms: 0, fps: 30, frame_count: 1800 },
    ],
    index_revision: 1,
  };
}

export function fixtureEvents(): EventsDoc {
  return {
    params: {},
    params_hash: "ha5h",
    candidates: [
      { event_id: "ev-1", stream_id: "au", channel: "AU12_r", method: "au_peak",
        peak_ms: 12_000, window: [10_500, 13_500], score: 3.0, params_hash: "ha5h",
        gap_flagged: false },
      { event_id: "ev-2", stream_id: "eda", channel: "eda", method: "physio_peak",
        peak_ms: 45_000, window: [44_750, 45_250], score: 2.8, params_hash: "ha5h",
        gap_flagged: true },
    ],
    groups: [
      { group_id: "grp-1", member_ids: ["ev-1"], span: [10_500, 13_500], anchor_ms: 12_000 },
      { group_id: "grp-2", member_ids: ["ev-2"], span: [44_750, 45_250], anchor_ms: 45_000 },
    ],
  };
}

export function fixturePackets(): EventPacket[] {
  const events = fixtureEvents();
  return events.groups.map((group, k) => ({
    packet_id: `pkt-${k + 1}`,
    group,
    pointers: [
      { stream_id: "au", modality_kind: "au",
        ref: { target_id: "au", start_idx: group.span[0] / 100, end_idx: group.span[1] / 100 + 1,
               start_ms: group.span[0], end_ms: group.span[1], out_of_span: false } },
      { stream_id: "eda", modality_kind: "eda",
        ref: { target_id: "eda", start_idx: Math.ceil(group.span[0] / 250),
               end_idx: Math.floor(group.span[1] / 250) + 1,
               start_ms: group.span[0], end_ms: group.span[1], out_of_span: false } },
    ],
    keyframes: [
      { video_id: "face-cam", frame_index: Math.floor((group.anchor_ms * 30) / 1000) },
      { video_id: "fpv-cam", frame_index: Math.floor((group.anchor_ms * 30) / 1000) },
    ],
    state: "candidate",
    boundary: [...group.span] as [number, number],
    edit_log: [],
    annotation_id: null,
    emotion_descriptor: null,
  }));
}

export function fixtureAnnotations(): AnnotationRecord[] {
  return fixturePackets().map((packet, k) => ({
    annotation_id: `ann-${k + 1}`,
    packet_id: packet.packet_id,
    face_description: "lip corner puller, cheek raiser",
    motion_description: "still",
    physio_description: "EDA rising 1.2 s then falling 0.8 s",
    context_description: "seated in a forest scene",
    multimodal_description: "a brief smile with a conductance response",
    emotion_descriptor: "joy",
    provenance: [],
    status: "draft",
    analyst_edits: [],
    failed_fields: [],
  }));
}

const PACKET_TRANSITIONS: Record<string, Record<string, string>> = {
  candidate: { verify: "verified", edit: "edited", discard: "discarded" },
  edited: { verify: "verified", edit: "edited", discard: "discarded" },
  verified: {},
  discarded: { restore: "candidate" },
};

const ANNOTATION_TRANSITIONS: Record<string, Record<string, string>> = {
  draft: { verify: "verified", edit: "edited", discard: "discarded" },
  edited: { verify: "verified", edit: "edited", discard: "discarded" },
  verified: {},
  discarded: { restore: "draft" },
};

export class FakeBackend {
  requests: RecordedRequest[] = [];
  session = fixtureSession();
  index = fixtureIndex();
  events = fixtureEvents();
  packets = fixturePackets();
  annotations = fixtureAnnotations();
  jobPollsUntilDone = 1;
  private jobs = new Map<string, { polls: number; packetId: string }>();

  requestsTo(fragment: string): RecordedRequest[] {
    return this.requests.filter((r) => r.url.includes(fragment));
  }

  install(): void {
    globalThis.fetch = ((input: RequestInfo | URL, init?: RequestInit) =>
      this.handle(String(input), init)) as typeof fetch;
  }

  private json(status: number, body: unknown): Response {
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  }

  private error(status: number, code: string, message: string): Response {
    return this.json(status, { code, message, detail: null });
  }

  async handle(url: string, init?: RequestInit): Promise<Response> {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    this.requests.push({ method, url, body });
    const path = url.replace(/^https?:\/\/[^/]+/, "");

    if (method === "GET" && path === "/sessions") return this.json(200, [this.session]);
    if (method === "GET" && path === `/sessions/${SESSION_ID}`) return this.json(200, this.session);
    if (method === "GET" && path === `/sessions/${SESSION_ID}/index`) return this.json(200, this.index);

    let m = path.match(/^\/sessions\/[^/]+\/streams\/([^/]+)\/envelope\?(.*)$/);
    if (m && method === "GET") {
      const params = new URLSearchParams(m[2]);
      const start = Number(params.get("start_ms"));
      const bucket = Number(params.get("bucket_ms"));
      const tiles = [0, 1, 2, 3].map((k) => [start + k * bucket, 0.1 * k, 0.1 * k + 0.5]);
      return this.json(200, {
        stream_id: m[1], channel: params.get("channel"), bucket_ms: bucket, tiles,
      });
    }

    m = path.match(/^\/sessions\/[^/]+\/streams\/([^/]+)\/samples\?/);
    if (m && method === "GET") {
      const channels = m[1] === "au" ? ["AU06_r", "AU12_r"] : ["eda"];
      return this.json(200, {
        ref: { target_id: m[1], start_idx: 0, end_idx: 0, start_ms: 0, end_ms: 0, out_of_span: false },
        channels, timestamps_ms: [], values: [],
      });
    }

    if (method === "GET" && path === `/sessions/${SESSION_ID}/events`) {
      return this.json(200, this.events);
    }
    if (method === "GET" && path === `/sessions/${SESSION_ID}/packets`) {
      return this.json(200, { packets: this.packets });
    }

    m = path.match(/^\/sessions\/[^/]+\/packets\/([^/]+)\/action$/);
    if (m && method === "POST") {
      const packet = this.packets.find((p) => p.packet_id === m![1]);
      if (!packet) return this.error(404, "not_found", `unknown packet ${m[1]}`);
      const next = PACKET_TRANSITIONS[packet.state][body.action];
      if (!next) {
        return this.error(409, "illegal_transition",
                          `cannot ${body.action} a ${packet.state} packet`);
      }
      if (body.action === "edit") {
        if (body.start_ms >= body.end_ms) {
          return this.error(400, "invalid_input", "inverted boundary");
        }
        packet.boundary = [body.start_ms, body.end_ms];
      }
      packet.state = next as EventPacket["state"];
      packet.edit_log = [...packet.edit_log, {
        at_ms: body.at_ms ?? 0, action: body.action,
        old_boundary: packet.boundary, new_boundary: packet.boundary, note: body.note ?? "",
      }];
      return this.json(200, packet);
    }

    m = path.match(/^\/sessions\/[^/]+\/packets\/([^/]+)\/annotate$/);
    if (m && method === "POST") {
      const jobId = `job-${this.jobs.size + 1}`;
      this.jobs.set(jobId, { polls: 0, packetId: m[1] });
      return this.json(200, { job_id: jobId, state: "pending" });
    }

    m = path.match(/^\/jobs\/([^/]+)$/);
    if (m && method === "GET") {
      const job = this.jobs.get(m[1]);
      if (!job) return this.error(404, "not_found", `unknown job ${m[1]}`);
      job.polls += 1;
      if (job.polls < this.jobPollsUntilDone) {
        return this.json(200, { job_id: m[1], state: "pending" } satisfies Job);
      }
      const annotation = this.annotations.find((a) => a.packet_id === job.packetId);
      return this.json(200, {
        job_id: m[1], state: "done", annotation_id: annotation?.annotation_id,
      });
    }

    if (method === "GET" && path === `/sessions/${SESSION_ID}/annotations`) {
      return this.json(200, { annotations: this.annotations });
    }

    m = path.match(/^\/sessions\/[^/]+\/annotations\/([^/]+)\/edit$/);
    if (m && method === "POST") {
      const record = this.annotations.find((a) => a.annotation_id === m![1]);
      if (!record) return this.error(404, "not_found", `unknown annotation ${m[1]}`);
      if (!ANNOTATION_TRANSITIONS[record.status].edit) {
        return this.error(409, "illegal_transition", `cannot edit a ${record.status} annotation`);
      }
      const mutable = record as unknown as Record<string, unknown>;
      record.analyst_edits = [...record.analyst_edits, {
        field: body.field, old: mutable[body.field] as string | null,
        new: body.new_text, at_ms: body.at_ms ?? 0,
      }];
      mutable[body.field] = body.new_text;
      record.status = "edited";
      return this.json(200, record);
    }

    m = path.match(/^\/sessions\/[^/]+\/annotations\/([^/]+)\/action$/);
    if (m && method === "POST") {
      const record = this.annotations.find((a) => a.annotation_id === m![1]);
      if (!record) return this.error(404, "not_found", `unknown annotation ${m[1]}`);
      const next = ANNOTATION_TRANSITIONS[record.status][body.action];
      if (!next) {
        return this.error(409, "illegal_transition",
                          `cannot ${body.action} a ${record.status} annotation`);
      }
      record.status = next as AnnotationRecord["status"];
      return this.json(200, record);
    }

    return this.error(404, "not_found", `unhandled ${method} ${path}`);
  }
}

export function installBackend(): FakeBackend {
  const backend = new FakeBackend();
  backend.install();
  return backend;
}
