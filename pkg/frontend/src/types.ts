// JSON shapes served by the annotation backend. These mirror the on-disk
// schemas exactly; the UI never invents state that is not derivable from them.

export interface StreamManifestEntry {
  stream_id: string;
  modality_kind: string;
  declared_rate_hz: number;
  source_path: string;
}

export interface VideoTrackRef {
  video_id: string;
  uri: string;
  fps: number;
  frame_count: number;
  offset_ms: number;
  kind: "face_avatar" | "first_person" | "rendered_signal";
  source_stream_id: string | null;
}

export interface SessionMeta {
  session_id: string;
  participant_id: string;
  scene_id: string;
  recording_epoch_ms: number;
  stream_manifest: StreamManifestEntry[];
  video_manifest: VideoTrackRef[];
}

export interface StreamIndexEntry {
  stream_id: string;
  modality_kind: string;
  offset_ms: number;
  rate_hz: number;
  sample_count: number;
}

export interface VideoIndexEntry {
  video_id: string;
  kind: string;
  uri: string;
  offset_ms: number;
  fps: number;
  frame_count: number;
}

export interface AlignmentIndex {
  session_id: string;
  t0_ms: number;
  t1_ms: number;
  streams: StreamIndexEntry[];
  videos: VideoIndexEntry[];
  index_revision: number;
}

export interface WindowRef {
  target_id: string;
  start_idx: number;
  end_idx: number;
  start_ms: number;
  end_ms: number;
  out_of_span: boolean;
}

export interface CandidateEvent {
  event_id: string;
  stream_id: string;
  channel: string;
  method: string;
  peak_ms: number;
  window: [number, number];
  score: number;
  params_hash: string;
  gap_flagged: boolean;
}

export interface EventGroup {
  group_id: string;
  member_ids: string[];
  span: [number, number];
  anchor_ms: number;
}

export interface EventsDoc {
  params: unknown;
  params_hash: string;
  candidates: CandidateEvent[];
  groups: EventGroup[];
}

export interface PacketPointer {
  stream_id: string;
  modality_kind: string;
  ref: WindowRef;
}

export interface Keyframe {
  video_id: string;
  frame_index: number;
}

export type PacketState = "candidate" | "verified" | "edited" | "discarded";

export interface EditLogEntry {
  at_ms: number;
  action: string;
  old_boundary: [number, number];
  new_boundary: [number, number];
  note: string;
}

export interface EventPacket {
  packet_id: string;
  group: EventGroup;
  pointers: PacketPointer[];
  keyframes: Keyframe[];
  state: PacketState;
  boundary: [number, number];
  edit_log: EditLogEntry[];
  annotation_id: string | null;
  emotion_descriptor: string | null;
}

export type AnnotationStatus = "draft" | "verified" | "edited" | "discarded";

export interface CallRecord {
  field: string;
  template_id: string;
  template_digest: string;
  prompt_sha256: string;
  response_sha256: string;
  model_id: string;
  attempt: number;
  ok: boolean;
  error: string | null;
  raw_response: string | null;
}

export interface AnnotationRecord {
  annotation_id: string;
  packet_id: string;
  face_description: string | null;
  motion_description: string | null;
  physio_description: string | null;
  context_description: string | null;
  multimodal_description: string | null;
  emotion_descriptor: string | null;
  provenance: CallRecord[];
  status: AnnotationStatus;
  analyst_edits: { field: string; old: string | null; new: string; at_ms: number }[];
  failed_fields: string[];
}

export type EnvelopeTile = [number, number, number]; // [t_ms, min, max]

export interface EnvelopeResponse {
  stream_id: string;
  channel: string;
  bucket_ms: number;
  tiles: EnvelopeTile[];
}

export interface SamplesResponse {
  ref: WindowRef;
  channels: string[];
  timestamps_ms: number[];
  values: number[][];
}

export interface Job {
  job_id: string;
  state: "pending" | "done" | "failed";
  annotation_id?: string;
  error?: string;
}

export interface ApiErrorBody {
  code: "not_found" | "conflict" | "invalid_input" | "illegal_transition" | "provider_failure";
  message: string;
  detail: unknown;
}
