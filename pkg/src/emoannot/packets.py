"""Event packets: traceable pointers, keyframes, and the verify/edit/discard loop.

A packet's pointers and keyframes are a pure function of (index, boundary,
anchor): every edit re-derives them, and replaying the edit log over a fresh
packet reproduces the final packet byte-exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from .errors import IllegalTransitionError, InvalidInputError
from .events import EventGroup
from .jsonio import digest12, dumps_canonical, loads
from .store import SessionStore
from .timeline import AlignmentIndex, WindowRef, time_to_frame, window_to_ref

CANDIDATE = "candidate"
VERIFIED = "verified"
EDITED = "edited"
DISCARDED = "discarded"

# state -> actions allowed from it
_TRANSITIONS = {
    CANDIDATE: {"verify": VERIFIED, "edit": EDITED, "discard": DISCARDED},
    EDITED: {"verify": VERIFIED, "edit": EDITED, "discard": DISCARDED},
    VERIFIED: {},
    DISCARDED: {"restore": CANDIDATE},
}


def now_ms() -> int:
    return int(time.time() * 1000)


@dataclass
class PacketPointer:
    stream_id: str
    modality_kind: str
    ref: WindowRef

    def to_dict(self) -> dict:
        return {"stream_id": self.stream_id, "modality_kind": self.modality_kind, "ref": self.ref.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "PacketPointer":
        return cls(d["stream_id"], d["modality_kind"], WindowRef.from_dict(d["ref"]))


@dataclass
class Keyframe:
    video_id: str
    frame_index: int

    def to_dict(self) -> dict:
        return {"video_id": self.video_id, "frame_index": self.frame_index}

    @classmethod
    def from_dict(cls, d: dict) -> "Keyframe":
        return cls(d["video_id"], d["frame_index"])


@dataclass
class EditLogEntry:
    at_ms: int
    action: str
    old_boundary: tuple[int, int]
    new_boundary: tuple[int, int]
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "at_ms": self.at_ms,
            "action": self.action,
            "old_boundary": [self.old_boundary[0], self.old_boundary[1]],
            "new_boundary": [self.new_boundary[0], self.new_boundary[1]],
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EditLogEntry":
        return cls(
            d["at_ms"], d["action"],
            (d["old_boundary"][0], d["old_boundary"][1]),
            (d["new_boundary"][0], d["new_boundary"][1]),
            d.get("note", ""),
        )


@dataclass
class EventPacket:
    """A grouped event plus everything an analyst needs to audit it."""

    packet_id: str
    group: EventGroup
    pointers: list[PacketPointer]
    keyframes: list[Keyframe]
    state: str
    boundary: tuple[int, int]
    edit_log: list[EditLogEntry] = field(default_factory=list)
    annotation_id: Optional[str] = None
    emotion_descriptor: Optional[str] = None  # back-reference filled by aggregation

    def to_dict(self) -> dict:
        return {
            "packet_id": self.packet_id,
            "group": self.group.to_dict(),
            "pointers": [p.to_dict() for p in self.pointers],
            "keyframes": [k.to_dict() for k in self.keyframes],
            "state": self.state,
            "boundary": [self.boundary[0], self.boundary[1]],
            "edit_log": [e.to_dict() for e in self.edit_log],
            "annotation_id": self.annotation_id,
            "emotion_descriptor": self.emotion_descriptor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EventPacket":
        return cls(
            packet_id=d["packet_id"],
            group=EventGroup.from_dict(d["group"]),
            pointers=[PacketPointer.from_dict(p) for p in d["pointers"]],
            keyframes=[Keyframe.from_dict(k) for k in d["keyframes"]],
            state=d["state"],
            boundary=(d["boundary"][0], d["boundary"][1]),
            edit_log=[EditLogEntry.from_dict(e) for e in d.get("edit_log", [])],
            annotation_id=d.get("annotation_id"),
            emotion_descriptor=d.get("emotion_descriptor"),
        )


def _derive(index: AlignmentIndex, boundary: tuple[int, int], anchor_ms: int):
    pointers = [
        PacketPointer(s.stream_id, s.modality_kind, window_to_ref(index, s.stream_id, boundary[0], boundary[1]))
        for s in sorted(index.streams, key=lambda s: s.stream_id)
    ]
    keyframes = [
        Keyframe(v.video_id, time_to_frame(index, v.video_id, anchor_ms))
        for v in sorted(index.videos, key=lambda v: v.video_id)
    ]
    return pointers, keyframes


def build_packet(group: EventGroup, index: AlignmentIndex) -> EventPacket:
    """Package a group: one pointer per session stream, one keyframe per video."""
    if not group.member_ids:
        raise InvalidInputError("group has no members")
    pointers, keyframes = _derive(index, group.span, group.anchor_ms)
    return EventPacket(
        packet_id="pkt-" + digest12(group.group_id),
        group=group,
        pointers=pointers,
        keyframes=keyframes,
        state=CANDIDATE,
        boundary=group.span,
    )


def apply_action(
    packet: EventPacket,
    index: AlignmentIndex,
    action: str,
    new_boundary: Optional[tuple[int, int]] = None,
    note: str = "",
    at_ms: Optional[int] = None,
) -> EventPacket:
    """Run one analyst action through the state machine; returns a new packet.

    Edits replace the boundary and re-derive pointers and keyframes from the
    index; every action appends to the edit log, which totally orders the
    packet's history.
    """
    allowed = _TRANSITIONS[packet.state]
    if action not in allowed:
        raise IllegalTransitionError(f"cannot {action} a {packet.state} packet")
    at = now_ms() if at_ms is None else int(at_ms)
    old_boundary = packet.boundary
    boundary = old_boundary
    pointers, keyframes = packet.pointers, packet.keyframes
    if action == "edit":
        if new_boundary is None:
            raise InvalidInputError("edit needs a new boundary")
        start, end = int(new_boundary[0]), int(new_boundary[1])
        if start >= end:
            raise InvalidInputError(f"inverted boundary ({start}, {end})")
        boundary = (start, end)
        pointers, keyframes = _derive(index, boundary, packet.group.anchor_ms)
    entry = EditLogEntry(at_ms=at, action=action, old_boundary=old_boundary, new_boundary=boundary, note=note)
    return EventPacket(
        packet_id=packet.packet_id,
        group=packet.group,
        pointers=pointers,
        keyframes=keyframes,
        state=allowed[action],
        boundary=boundary,
        edit_log=list(packet.edit_log) + [entry],
        annotation_id=packet.annotation_id,
        emotion_descriptor=packet.emotion_descriptor,
    )


def replay_packet(group: EventGroup, index: AlignmentIndex, edit_log: list[EditLogEntry]) -> EventPacket:
    """Reconstruct a packet by replaying its logged actions over a fresh build."""
    packet = build_packet(group, index)
    for entry in edit_log:
        packet = apply_action(
            packet, index, entry.action,
            new_boundary=entry.new_boundary if entry.action == "edit" else None,
            note=entry.note, at_ms=entry.at_ms,
        )
    return packet


def attach_annotation(packet: EventPacket, annotation_id: str, emotion_descriptor: Optional[str]) -> EventPacket:
    """Store the aggregated emotion descriptor back onto the packet."""
    return EventPacket(
        packet_id=packet.packet_id,
        group=packet.group,
        pointers=packet.pointers,
        keyframes=packet.keyframes,
        state=packet.state,
        boundary=packet.boundary,
        edit_log=list(packet.edit_log),
        annotation_id=annotation_id,
        emotion_descriptor=emotion_descriptor,
    )


# -- persistence --------------------------------------------------------


def save_packets(store: SessionStore, session_id: str, packets: list[EventPacket]) -> None:
    doc = {"packets": [p.to_dict() for p in packets]}
    store.put_blob(session_id, "packets", dumps_canonical(doc))


def load_packets(store: SessionStore, session_id: str) -> list[EventPacket]:
    doc = loads(store.get_blob(session_id, "packets"))
    return [EventPacket.from_dict(p) for p in doc["packets"]]


def packet_to_bytes(packet: EventPacket) -> bytes:
    return dumps_canonical(packet.to_dict())
