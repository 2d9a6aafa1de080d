// Thin typed client over the backend HTTP contract. Every UI mutation goes
// through exactly one method here, which makes "one action, one call"
// assertable in tests.

import type {
  AlignmentIndex,
  AnnotationRecord,
  ApiErrorBody,
  EnvelopeResponse,
  EventPacket,
  EventsDoc,
  Job,
  SamplesResponse,
  SessionMeta,
} from "./types";

export class ApiError extends Error {
  constructor(
    public code: ApiErrorBody["code"],
    message: string,
    public status: number,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  try {
    const body = (await response.json()) as ApiErrorBody;
    return new ApiError(body.code, body.message, response.status);
  } catch {
    return new ApiError("invalid_input", `HTTP ${response.status}`, response.status);
  }
}

export class ApiClient {
  constructor(private base: string = "") {}

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(this.base + path);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  listSessions(participant?: string, scene?: string): Promise<SessionMeta[]> {
    const q = new URLSearchParams();
    if (participant) q.set("participant", participant);
    if (scene) q.set("scene", scene);
    const suffix = q.size ? `?${q}` : "";
    return this.get(`/sessions${suffix}`);
  }

  getSession(sid: string): Promise<SessionMeta> {
    return this.get(`/sessions/${sid}`);
  }

  getIndex(sid: string): Promise<AlignmentIndex> {
    return this.get(`/sessions/${sid}/index`);
  }

  getEnvelope(
    sid: string,
    streamId: string,
    channel: string,
    startMs: number,
    endMs: number,
    bucketMs: number,
  ): Promise<EnvelopeResponse> {
    const q = new URLSearchParams({
      channel,
      start_ms: String(startMs),
      end_ms: String(endMs),
      bucket_ms: String(bucketMs),
    });
    return this.get(`/sessions/${sid}/streams/${streamId}/envelope?${q}`);
  }

  getSamples(sid: string, streamId: string, startMs: number, endMs: number): Promise<SamplesResponse> {
    const q = new URLSearchParams({ start_ms: String(startMs), end_ms: String(endMs) });
    return this.get(`/sessions/${sid}/streams/${streamId}/samples?${q}`);
  }

  getEvents(sid: string): Promise<EventsDoc> {
    return this.get(`/sessions/${sid}/events`);
  }

  getPackets(sid: string): Promise<{ packets: EventPacket[] }> {
    return this.get(`/sessions/${sid}/packets`);
  }

  packetAction(
    sid: string,
    packetId: string,
    action: string,
    boundary?: [number, number],
    note = "",
  ): Promise<EventPacket> {
    const body: Record<string, unknown> = { action, note };
    if (boundary) {
      body.start_ms = boundary[0];
      body.end_ms = boundary[1];
    }
    return this.post(`/sessions/${sid}/packets/${packetId}/action`, body);
  }

  triggerAnnotation(sid: string, packetId: string, provider = "mock"): Promise<Job> {
    return this.post(`/sessions/${sid}/packets/${packetId}/annotate`, { provider });
  }

  getJob(jobId: string): Promise<Job> {
    return this.get(`/jobs/${jobId}`);
  }

  getAnnotations(sid: string): Promise<{ annotations: AnnotationRecord[] }> {
    return this.get(`/sessions/${sid}/annotations`);
  }

  editAnnotation(sid: string, annotationId: string, field: string, newText: string): Promise<AnnotationRecord> {
    return this.post(`/sessions/${sid}/annotations/${annotationId}/edit`, {
      field,
      new_text: newText,
    });
  }

  annotationAction(sid: string, annotationId: string, action: string): Promise<AnnotationRecord> {
    return this.post(`/sessions/${sid}/annotations/${annotationId}/action`, { action });
  }

  triggerExport(sid: string, states: string[]): Promise<{ path: string; record_count: number }> {
    return this.post(`/sessions/${sid}/export`, { states });
  }
}
