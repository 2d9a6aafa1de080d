"""Training-ready record export: JSON-lines with a leading manifest line.

Only packets and annotations that an analyst accepted (verified or edited,
by default) are emitted; records sort by boundary start so identical store
state always exports identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .annotate import AnnotationRecord, load_annotations
from .errors import InvalidInputError
from .events import load_events
from .jsonio import dumps_compact, loads
from .packets import load_packets
from .store import SessionStore

EXPORT_VERSION = "1"
DEFAULT_ELIGIBLE = ("verified", "edited")


@dataclass
class ExportRecord:
    session_id: str
    participant_id: str
    scene_id: str
    packet_id: str
    boundary: tuple[int, int]
    pointers: list[dict]
    face_description: Optional[str]
    motion_description: Optional[str]
    physio_description: Optional[str]
    context_description: Optional[str]
    multimodal_description: Optional[str]
    emotion_descriptor: Optional[str]
    provenance_digests: dict
    export_version: str = EXPORT_VERSION

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "participant_id": self.participant_id,
            "scene_id": self.scene_id,
            "packet_id": self.packet_id,
            "boundary": [self.boundary[0], self.boundary[1]],
            "pointers": self.pointers,
            "face_description": self.face_description,
            "motion_description": self.motion_description,
            "physio_description": self.physio_description,
            "context_description": self.context_description,
            "multimodal_description": self.multimodal_description,
            "emotion_descriptor": self.emotion_descriptor,
            "provenance_digests": self.provenance_digests,
            "export_version": self.export_version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExportRecord":
        return cls(
            session_id=d["session_id"],
            participant_id=d["participant_id"],
            scene_id=d["scene_id"],
            packet_id=d["packet_id"],
            boundary=(d["boundary"][0], d["boundary"][1]),
            pointers=d["pointers"],
            face_description=d.get("face_description"),
            motion_description=d.get("motion_description"),
            physio_description=d.get("physio_description"),
            context_description=d.get("context_description"),
            multimodal_description=d.get("multimodal_description"),
            emotion_descriptor=d.get("emotion_descriptor"),
            provenance_digests=d["provenance_digests"],
            export_version=d.get("export_version", EXPORT_VERSION),
        )


def _provenance_digests(ann: AnnotationRecord, params_hash: Optional[str]) -> dict:
    return {
        "model_ids": sorted({c.model_id for c in ann.provenance}),
        "template_digests": sorted({c.template_digest for c in ann.provenance}),
        "prompt_sha256s": [c.prompt_sha256 for c in ann.provenance],
        "response_sha256s": [c.response_sha256 for c in ann.provenance],
        "params_hash": params_hash,
    }


def build_export_records(
    store: SessionStore,
    session_id: str,
    packet_states: Sequence[str] = DEFAULT_ELIGIBLE,
    annotation_states: Sequence[str] = DEFAULT_ELIGIBLE,
) -> tuple[list[ExportRecord], dict]:
    """Eligible (packet, annotation) pairs for one session plus the manifest."""
    meta = store.get_session(session_id)
    packets = load_packets(store, session_id)
    annotations = {a.packet_id: a for a in load_annotations(store, session_id)}
    try:
        _, _, params = load_events(store, session_id)
        params_hash: Optional[str] = params.digest()
    except KeyError:
        params_hash = None

    packet_states = tuple(packet_states)
    annotation_states = tuple(annotation_states)
    records: list[ExportRecord] = []
    for packet in packets:
        if packet.state not in packet_states:
            continue
        ann = annotations.get(packet.packet_id)
        if ann is None or ann.status not in annotation_states:
            continue
        records.append(
            ExportRecord(
                session_id=meta.session_id,
                participant_id=meta.participant_id,
                scene_id=meta.scene_id,
                packet_id=packet.packet_id,
                boundary=packet.boundary,
                pointers=[p.to_dict() for p in packet.pointers],
                face_description=ann.face_description,
                motion_description=ann.motion_description,
                physio_description=ann.physio_description,
                context_description=ann.context_description,
                multimodal_description=ann.multimodal_description,
                emotion_descriptor=ann.emotion_descriptor,
                provenance_digests=_provenance_digests(ann, params_hash),
            )
        )
    records.sort(key=lambda r: (r.boundary[0], r.packet_id))
    manifest = {
        "type": "manifest",
        "export_version": EXPORT_VERSION,
        "session_id": session_id,
        "record_count": len(records),
        "packet_states": list(packet_states),
        "annotation_states": list(annotation_states),
        "params_hashes": [params_hash] if params_hash else [],
    }
    return records, manifest


def export_session(
    store: SessionStore,
    session_id: str,
    packet_states: Sequence[str] = DEFAULT_ELIGIBLE,
    annotation_states: Sequence[str] = DEFAULT_ELIGIBLE,
) -> bytes:
    """Serialize the session's eligible records as manifest-headed JSONL."""
    records, manifest = build_export_records(store, session_id, packet_states, annotation_states)
    lines = [dumps_compact(manifest)]
    lines.extend(dumps_compact(r.to_dict()) for r in records)
    return b"\n".join(lines) + b"\n"


def read_export(data: bytes) -> tuple[dict, list[ExportRecord]]:
    """Parse an export file back into (manifest, records)."""
    lines = [ln for ln in data.decode("utf-8").splitlines() if ln.strip()]
    if not lines:
        raise InvalidInputError("empty export file")
    manifest = loads(lines[0])
    if manifest.get("type") != "manifest":
        raise InvalidInputError("export file must start with a manifest line")
    records = [ExportRecord.from_dict(loads(ln)) for ln in lines[1:]]
    return manifest, records
