"""Structured annotation drafting: templates, provider calls, record lifecycle.

The provider must answer in a flat `key: value` line format; a malformed
reply earns exactly one repair re-prompt carrying the validation error, and
a second failure marks the field as failed while preserving the raw
responses. Every provider call is recorded as (prompt hash, response hash),
so each LLM-derived character in a record is attributable.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .describe import CONTEXT, ModalityDescriptor
from .errors import IllegalTransitionError, InvalidInputError, NotFoundError
from .jsonio import digest12, dumps_canonical, loads, sha256_hex
from .packets import DISCARDED, EventPacket
from .providers import Attachment, LlmProvider
from .store import SessionStore

PLACEHOLDERS = {"event_window", "features", "keyframe_refs", "prior_descriptions"}
MAX_FIELD_LEN = 4000
MAX_ATTEMPTS = 2  # initial call + one repair re-prompt

UNIMODAL_FIELDS = ("face", "motion", "physio", "context")
FIELD_TO_RECORD_KEY = {
    "face": "face_description",
    "motion": "motion_description",
    "physio": "physio_description",
    "context": "context_description",
}
EDITABLE_FIELDS = (
    "face_description",
    "motion_description",
    "physio_description",
    "context_description",
    "multimodal_description",
    "emotion_descriptor",
)

DRAFT = "draft"
VERIFIED = "verified"
EDITED = "edited"
DISCARDED_A = "discarded"

_STATUS_TRANSITIONS = {
    DRAFT: {"verify": VERIFIED, "edit": EDITED, "discard": DISCARDED_A},
    EDITED: {"verify": VERIFIED, "edit": EDITED, "discard": DISCARDED_A},
    VERIFIED: {},
    DISCARDED_A: {"restore": DRAFT},
}

_LINE_RE = re.compile(r"^([a-z_]+):\s?(.*)$")


class SchemaValidationError(InvalidInputError):
    """Provider reply does not match the fixed-field text schema."""


@dataclass
class PromptTemplate:
    template_id: str
    modality: str
    body: str
    version: str = "1"

    def __post_init__(self) -> None:
        used = {name for _, name, _, _ in string.Formatter().parse(self.body) if name}
        unknown = used - PLACEHOLDERS
        if unknown:
            raise InvalidInputError(f"template {self.template_id} uses undeclared placeholders {sorted(unknown)}")
        self._used = used

    @property
    def digest(self) -> str:
        return sha256_hex(self.body)

    @property
    def placeholders(self) -> set[str]:
        return set(self._used)


def parse_template(text: str) -> PromptTemplate:
    """Parse the versioned template file format (header lines, `---`, body)."""
    head, sep, body = text.partition("\n---\n")
    if not sep:
        raise InvalidInputError("template file needs a `---` separator line")
    meta: dict[str, str] = {}
    for ln in head.splitlines():
        if not ln.strip():
            continue
        key, _, value = ln.partition(":")
        meta[key.strip()] = value.strip()
    for required in ("template_id", "modality"):
        if required not in meta:
            raise InvalidInputError(f"template header missing {required}")
    return PromptTemplate(
        template_id=meta["template_id"],
        modality=meta["modality"],
        body=body.strip("\n"),
        version=meta.get("version", "1"),
    )


def load_template_file(path: str | Path) -> PromptTemplate:
    return parse_template(Path(path).read_text(encoding="utf-8"))


def default_templates() -> dict[str, PromptTemplate]:
    """Bundled templates keyed by modality (face/motion/physio/context/multimodal)."""
    out: dict[str, PromptTemplate] = {}
    for name in ("face", "motion", "physio", "context", "multimodal"):
        text = resources.files("emoannot.templates").joinpath(f"{name}.txt").read_text(encoding="utf-8")
        tpl = parse_template(text)
        out[tpl.modality] = tpl
    return out


def _format_features(descriptor: ModalityDescriptor) -> str:
    lines = [f"{k}={v}" for k, v in descriptor.features]
    lines.append(f"summary={descriptor.summary}")
    return "\n".join(lines)


def render_prompt(
    template: PromptTemplate,
    packet: EventPacket,
    descriptors: dict[str, ModalityDescriptor],
    prior_descriptions: Optional[dict[str, str]] = None,
) -> str:
    """Pure placeholder substitution; raises on anything unresolved."""
    own = descriptors.get(template.modality)
    mapping: dict[str, str] = {}
    if "event_window" in template.placeholders:
        mapping["event_window"] = (
            f"[{packet.boundary[0]} ms, {packet.boundary[1]} ms]"
            f" (anchor {packet.group.anchor_ms} ms)"
        )
    if "features" in template.placeholders:
        if own is None:
            raise InvalidInputError(f"no descriptor for modality {template.modality}")
        mapping["features"] = _format_features(own)
    if "keyframe_refs" in template.placeholders:
        ctx = descriptors.get(CONTEXT)
        if ctx is None:
            raise InvalidInputError("no context descriptor for keyframe_refs")
        mapping["keyframe_refs"] = _format_features(ctx)
    if "prior_descriptions" in template.placeholders:
        if not prior_descriptions:
            raise InvalidInputError("no prior descriptions to aggregate")
        mapping["prior_descriptions"] = "\n".join(
            f"{modality}: {text}" for modality, text in prior_descriptions.items()
        )
    try:
        return template.body.format(**mapping)
    except (KeyError, IndexError) as exc:
        raise InvalidInputError(f"unresolved placeholder in {template.template_id}: {exc}") from exc


def parse_structured_reply(
    text: str, required: Sequence[str], emotion_vocab: Optional[Sequence[str]] = None
) -> dict[str, str]:
    """Validate a fixed-field reply: required keys, non-empty, bounded length."""
    fields: dict[str, str] = {}
    for raw in text.splitlines():
        ln = raw.strip()
        if not ln:
            continue
        m = _LINE_RE.match(ln)
        if not m:
            raise SchemaValidationError(f"line does not match 'key: value': {ln[:80]!r}")
        key, value = m.group(1), m.group(2).strip()
        if key in fields:
            raise SchemaValidationError(f"duplicate field {key!r}")
        fields[key] = value
    for key in required:
        if key not in fields:
            raise SchemaValidationError(f"missing required field {key!r}")
        if not fields[key]:
            raise SchemaValidationError(f"field {key!r} is empty")
        if len(fields[key]) > MAX_FIELD_LEN:
            raise SchemaValidationError(f"field {key!r} exceeds {MAX_FIELD_LEN} chars")
    extra = set(fields) - set(required)
    if extra:
        raise SchemaValidationError(f"unexpected fields {sorted(extra)}")
    if emotion_vocab is not None and "emotion_descriptor" in required:
        if fields["emotion_descriptor"] not in set(emotion_vocab):
            raise SchemaValidationError(
                f"emotion_descriptor {fields['emotion_descriptor']!r} not in configured vocabulary"
            )
    return fields


@dataclass
class CallRecord:
    """Provenance for one provider call."""

    field: str
    template_id: str
    template_digest: str
    prompt_sha256: str
    response_sha256: str
    model_id: str
    attempt: int
    ok: bool
    error: Optional[str] = None
    raw_response: Optional[str] = None  # preserved only for failed attempts

    def to_dict(self) -> dict:
        return {
            "field": self.field,
            "template_id": self.template_id,
            "template_digest": self.template_digest,
            "prompt_sha256": self.prompt_sha256,
            "response_sha256": self.response_sha256,
            "model_id": self.model_id,
            "attempt": self.attempt,
            "ok": self.ok,
            "error": self.error,
            "raw_response": self.raw_response,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CallRecord":
        return cls(
            d["field"], d["template_id"], d["template_digest"], d["prompt_sha256"],
            d["response_sha256"], d["model_id"], d["attempt"], d["ok"],
            d.get("error"), d.get("raw_response"),
        )


@dataclass
class AnalystEdit:
    field: str
    old: Optional[str]
    new: str
    at_ms: int

    def to_dict(self) -> dict:
        return {"field": self.field, "old": self.old, "new": self.new, "at_ms": self.at_ms}

    @classmethod
    def from_dict(cls, d: dict) -> "AnalystEdit":
        return cls(d["field"], d.get("old"), d["new"], d["at_ms"])


@dataclass
class AnnotationRecord:
    annotation_id: str
    packet_id: str
    face_description: Optional[str] = None
    motion_description: Optional[str] = None
    physio_description: Optional[str] = None
    context_description: Optional[str] = None
    multimodal_description: Optional[str] = None
    emotion_descriptor: Optional[str] = None
    provenance: list[CallRecord] = field(default_factory=list)
    status: str = DRAFT
    analyst_edits: list[AnalystEdit] = field(default_factory=list)
    failed_fields: list[str] = field(default_factory=list)

    def get_field(self, name: str) -> Optional[str]:
        if name not in EDITABLE_FIELDS:
            raise InvalidInputError(f"unknown annotation field {name!r}")
        return getattr(self, name)

    def populated_unimodal(self) -> dict[str, str]:
        out = {}
        for modality in UNIMODAL_FIELDS:
            value = getattr(self, FIELD_TO_RECORD_KEY[modality])
            if value is not None:
                out[modality] = value
        return out

    def to_dict(self) -> dict:
        return {
            "annotation_id": self.annotation_id,
            "packet_id": self.packet_id,
            "face_description": self.face_description,
            "motion_description": self.motion_description,
            "physio_description": self.physio_description,
            "context_description": self.context_description,
            "multimodal_description": self.multimodal_description,
            "emotion_descriptor": self.emotion_descriptor,
            "provenance": [c.to_dict() for c in self.provenance],
            "status": self.status,
            "analyst_edits": [e.to_dict() for e in self.analyst_edits],
            "failed_fields": list(self.failed_fields),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotationRecord":
        return cls(
            annotation_id=d["annotation_id"],
            packet_id=d["packet_id"],
            face_description=d.get("face_description"),
            motion_description=d.get("motion_description"),
            physio_description=d.get("physio_description"),
            context_description=d.get("context_description"),
            multimodal_description=d.get("multimodal_description"),
            emotion_descriptor=d.get("emotion_descriptor"),
            provenance=[CallRecord.from_dict(c) for c in d.get("provenance", [])],
            status=d.get("status", DRAFT),
            analyst_edits=[AnalystEdit.from_dict(e) for e in d.get("analyst_edits", [])],
            failed_fields=list(d.get("failed_fields", [])),
        )


def _context_attachments(descriptors: dict[str, ModalityDescriptor]) -> list[Attachment]:
    ctx = descriptors.get(CONTEXT)
    if ctx is None:
        return []
    uri = ctx.feature("uri")
    out = []
    for key in ("frame_start", "frame_anchor", "frame_end"):
        frame = ctx.feature(key)
        if uri is not None and frame is not None:
            out.append(Attachment(uri=str(uri), frame_index=int(frame)))
    return out


def _call_with_repair(
    provider: LlmProvider,
    prompt: str,
    required: Sequence[str],
    field_name: str,
    template: PromptTemplate,
    provenance: list[CallRecord],
    attachments: Sequence[Attachment] = (),
    emotion_vocab: Optional[Sequence[str]] = None,
) -> Optional[dict[str, str]]:
    """One call plus at most one repair re-prompt; None means the field failed."""
    current = prompt
    for attempt in range(1, MAX_ATTEMPTS + 1):
        response = provider.complete(current, attachments)
        try:
            parsed = parse_structured_reply(response, required, emotion_vocab)
            provenance.append(
                CallRecord(
                    field=field_name,
                    template_id=template.template_id,
                    template_digest=template.digest,
                    prompt_sha256=sha256_hex(current),
                    response_sha256=sha256_hex(response),
                    model_id=provider.model_id,
                    attempt=attempt,
                    ok=True,
                )
            )
            return parsed
        except SchemaValidationError as exc:
            provenance.append(
                CallRecord(
                    field=field_name,
                    template_id=template.template_id,
                    template_digest=template.digest,
                    prompt_sha256=sha256_hex(current),
                    response_sha256=sha256_hex(response),
                    model_id=provider.model_id,
                    attempt=attempt,
                    ok=False,
                    error=str(exc),
                    raw_response=response,
                )
            )
            current = (
                prompt
                + "\n\nYour previous reply was invalid: "
                + str(exc)
                + "\nReply again following the required format exactly."
            )
    return None


def annotate_event(
    packet: EventPacket,
    descriptors: dict[str, ModalityDescriptor],
    templates: dict[str, PromptTemplate],
    provider: LlmProvider,
) -> AnnotationRecord:
    """Draft unimodal annotation fields for one packet, one call per modality."""
    if packet.state == DISCARDED:
        raise IllegalTransitionError("cannot annotate a discarded packet")
    record = AnnotationRecord(
        annotation_id="ann-" + digest12(packet.packet_id),
        packet_id=packet.packet_id,
    )
    for modality in UNIMODAL_FIELDS:
        descriptor = descriptors.get(modality)
        if descriptor is None:
            continue
        template = templates.get(modality)
        if template is None:
            raise NotFoundError(f"no template for modality {modality}")
        prompt = render_prompt(template, packet, descriptors)
        attachments = _context_attachments(descriptors) if (
            modality == CONTEXT and provider.image_input
        ) else ()
        parsed = _call_with_repair(
            provider, prompt, ["description"], modality, template, record.provenance, attachments,
        )
        if parsed is None:
            record.failed_fields.append(modality)
        else:
            setattr(record, FIELD_TO_RECORD_KEY[modality], parsed["description"])
    return record


def aggregate_multimodal(
    record: AnnotationRecord,
    packet: EventPacket,
    template: PromptTemplate,
    provider: LlmProvider,
    emotion_vocab: Optional[Sequence[str]] = None,
) -> AnnotationRecord:
    """Fuse the populated unimodal descriptions into the multimodal fields."""
    priors = record.populated_unimodal()
    if not priors:
        raise InvalidInputError("no populated unimodal fields to aggregate")
    prompt = render_prompt(template, packet, {}, prior_descriptions=priors)
    parsed = _call_with_repair(
        provider, prompt, ["multimodal_description", "emotion_descriptor"],
        "multimodal", template, record.provenance, emotion_vocab=emotion_vocab,
    )
    if parsed is None:
        record.failed_fields.append("multimodal")
    else:
        record.multimodal_description = parsed["multimodal_description"]
        record.emotion_descriptor = parsed["emotion_descriptor"]
    return record


def apply_annotation_edit(
    record: AnnotationRecord, field_name: str, new_text: str, at_ms: int
) -> AnnotationRecord:
    """Replace one field, remembering the original text; status becomes edited."""
    if "edit" not in _STATUS_TRANSITIONS[record.status]:
        raise IllegalTransitionError(f"cannot edit a {record.status} annotation")
    old = record.get_field(field_name)
    setattr(record, field_name, new_text)
    record.analyst_edits.append(AnalystEdit(field=field_name, old=old, new=new_text, at_ms=at_ms))
    record.status = EDITED
    return record


def annotation_action(record: AnnotationRecord, action: str) -> AnnotationRecord:
    """verify / discard / restore, mirroring the packet state machine."""
    allowed = _STATUS_TRANSITIONS[record.status]
    if action not in allowed:
        raise IllegalTransitionError(f"cannot {action} a {record.status} annotation")
    record.status = allowed[action]
    return record


def replay_annotation_edits(pristine: AnnotationRecord, edits: list[AnalystEdit]) -> AnnotationRecord:
    out = AnnotationRecord.from_dict(pristine.to_dict())
    for e in edits:
        apply_annotation_edit(out, e.field, e.new, e.at_ms)
    return out


# -- persistence --------------------------------------------------------


def save_annotations(store: SessionStore, session_id: str, records: list[AnnotationRecord]) -> None:
    doc = {"annotations": [r.to_dict() for r in records]}
    store.put_blob(session_id, "annotations", dumps_canonical(doc))


def load_annotations(store: SessionStore, session_id: str) -> list[AnnotationRecord]:
    doc = loads(store.get_blob(session_id, "annotations"))
    return [AnnotationRecord.from_dict(r) for r in doc["annotations"]]
