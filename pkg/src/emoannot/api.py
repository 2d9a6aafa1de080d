"""HTTP projection of the module operations for the companion UI.

Every endpoint is a thin, lossless wrapper: the response body is exactly the
serialized output of the underlying module call, so the UI and the batch
pipeline can never drift apart. Annotation runs asynchronously on a bounded
worker pool; the UI polls the job endpoint.
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import annotate as annotate_mod
from . import export as export_mod
from . import packets as packets_mod
from . import timeline
from .cli import build_descriptors
from .errors import (
    ConflictError,
    IllegalTransitionError,
    InvalidInputError,
    NotFoundError,
    ProviderTransportError,
)
from .events import DetectorParams, load_events
from .jsonio import loads, sha256_hex
from .providers import make_provider
from .store import SessionStore

_ERROR_MAP = [
    (NotFoundError, "not_found", 404),
    (ConflictError, "conflict", 409),
    (IllegalTransitionError, "illegal_transition", 409),
    (InvalidInputError, "invalid_input", 400),
    (ProviderTransportError, "provider_failure", 502),
]


class ActionBody(BaseModel):
    action: str
    start_ms: Optional[int] = None
    end_ms: Optional[int] = None
    note: str = ""
    at_ms: Optional[int] = None


class AnnotateBody(BaseModel):
    provider: str = "mock"
    transcript: Optional[list[str]] = None
    at_ms: Optional[int] = None


class AnnotationEditBody(BaseModel):
    field: str
    new_text: str
    at_ms: Optional[int] = None


class AnnotationActionBody(BaseModel):
    action: str


class ExportBody(BaseModel):
    states: list[str] = ["verified", "edited"]


class _Jobs:
    def __init__(self, workers: int):
        self.pool = ThreadPoolExecutor(max_workers=workers)
        self.lock = threading.Lock()
        self.state: dict[str, dict] = {}

    def submit(self, fn) -> str:
        job_id = uuid.uuid4().hex[:12]
        with self.lock:
            self.state[job_id] = {"job_id": job_id, "state": "pending"}

        def run():
            try:
                result = fn()
                with self.lock:
                    self.state[job_id] = {"job_id": job_id, "state": "done", **result}
            except Exception as exc:  # surfaced through the job endpoint
                with self.lock:
                    self.state[job_id] = {"job_id": job_id, "state": "failed", "error": str(exc)}

        self.pool.submit(run)
        return job_id

    def get(self, job_id: str) -> dict:
        with self.lock:
            if job_id not in self.state:
                raise NotFoundError(f"unknown job {job_id}")
            return dict(self.state[job_id])


def create_app(
    store: SessionStore,
    params: Optional[DetectorParams] = None,
    emotion_vocab: Optional[list[str]] = None,
    annotation_workers: int = 2,
) -> FastAPI:
    app = FastAPI(title="emoannot API", version="0.1.0")
    detector_params = params or DetectorParams()
    jobs = _Jobs(annotation_workers)

    def error_response(exc: Exception) -> JSONResponse:
        for klass, code, status in _ERROR_MAP:
            if isinstance(exc, klass):
                return JSONResponse(
                    status_code=status,
                    content={"code": code, "message": str(exc), "detail": None},
                )
        raise exc

    for klass, _code, _status in _ERROR_MAP:
        app.add_exception_handler(klass, lambda request, exc: error_response(exc))

    @app.middleware("http")
    async def etag_middleware(request: Request, call_next):
        response = await call_next(request)
        if request.method == "GET" and response.status_code == 200:
            body = b""
            async for chunk in response.body_iterator:
                body += chunk
            etag = '"' + sha256_hex(body)[:16] + '"'
            if request.headers.get("if-none-match") == etag:
                return Response(status_code=304, headers={"ETag": etag})
            headers = dict(response.headers)
            headers["ETag"] = etag
            return Response(
                content=body, status_code=200, headers=headers,
                media_type=response.media_type,
            )
        return response

    # -- sessions and tracks ------------------------------------------

    @app.get("/sessions")
    def list_sessions(participant: Optional[str] = None, scene: Optional[str] = None):
        return [m.to_dict() for m in store.list_sessions(participant, scene)]

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return store.get_session(session_id).to_dict()

    @app.get("/sessions/{session_id}/index")
    def get_index(session_id: str):
        return timeline.load_index(store, session_id).to_dict()

    @app.get("/sessions/{session_id}/streams/{stream_id}/envelope")
    def get_envelope(session_id: str, stream_id: str, channel: str,
                     start_ms: int, end_ms: int, bucket_ms: int):
        index = timeline.load_index(store, session_id)
        stream = store.get_stream(session_id, stream_id)
        tiles = timeline.windowed_envelope(index, stream, channel, start_ms, end_ms, bucket_ms)
        return {"stream_id": stream_id, "channel": channel, "bucket_ms": bucket_ms,
                "tiles": [[t, lo, hi] for t, lo, hi in tiles]}

    @app.get("/sessions/{session_id}/streams/{stream_id}/samples")
    def get_samples(session_id: str, stream_id: str, start_ms: int, end_ms: int):
        index = timeline.load_index(store, session_id)
        stream = store.get_stream(session_id, stream_id)
        ref = timeline.window_to_ref(index, stream_id, start_ms, end_ms)
        ts, values = timeline.slice_window(stream, ref)
        return {"ref": ref.to_dict(), "channels": stream.channel_names,
                "timestamps_ms": ts, "values": values}

    # -- events and packets --------------------------------------------

    @app.get("/sessions/{session_id}/events")
    def get_events(session_id: str):
        candidates, groups, params_ = load_events(store, session_id)
        return {"params": params_.to_dict(), "params_hash": params_.digest(),
                "candidates": [c.to_dict() for c in candidates],
                "groups": [g.to_dict() for g in groups]}

    @app.get("/sessions/{session_id}/packets")
    def get_packets(session_id: str):
        return {"packets": [p.to_dict() for p in packets_mod.load_packets(store, session_id)]}

    @app.get("/sessions/{session_id}/packets/{packet_id}")
    def get_packet(session_id: str, packet_id: str):
        for p in packets_mod.load_packets(store, session_id):
            if p.packet_id == packet_id:
                return p.to_dict()
        raise NotFoundError(f"unknown packet {packet_id}")

    @app.post("/sessions/{session_id}/packets/{packet_id}/action")
    def packet_action(session_id: str, packet_id: str, body: ActionBody):
        index = timeline.load_index(store, session_id)
        packet_list = packets_mod.load_packets(store, session_id)
        hits = [i for i, p in enumerate(packet_list) if p.packet_id == packet_id]
        if not hits:
            raise NotFoundError(f"unknown packet {packet_id}")
        new_boundary = None
        if body.action == "edit":
            if body.start_ms is None or body.end_ms is None:
                raise InvalidInputError("edit needs start_ms and end_ms")
            new_boundary = (body.start_ms, body.end_ms)
        updated = packets_mod.apply_action(
            packet_list[hits[0]], index, body.action,
            new_boundary=new_boundary, note=body.note, at_ms=body.at_ms,
        )
        packet_list[hits[0]] = updated
        packets_mod.save_packets(store, session_id, packet_list)
        return updated.to_dict()

    # -- annotation -----------------------------------------------------

    def _run_annotation(session_id: str, packet_id: str, body: AnnotateBody) -> dict:
        index = timeline.load_index(store, session_id)
        packet_list = packets_mod.load_packets(store, session_id)
        hits = [i for i, p in enumerate(packet_list) if p.packet_id == packet_id]
        if not hits:
            raise NotFoundError(f"unknown packet {packet_id}")
        packet = packet_list[hits[0]]
        provider = make_provider(body.provider, body.transcript)
        templates = annotate_mod.default_templates()
        descriptors = build_descriptors(store, session_id, packet, index, detector_params)
        record = annotate_mod.annotate_event(packet, descriptors, templates, provider)
        if record.populated_unimodal():
            record = annotate_mod.aggregate_multimodal(
                record, packet, templates["multimodal"], provider, emotion_vocab=emotion_vocab,
            )
        try:
            records = annotate_mod.load_annotations(store, session_id)
        except NotFoundError:
            records = []
        records = [r for r in records if r.packet_id != packet.packet_id] + [record]
        records.sort(key=lambda r: r.annotation_id)
        annotate_mod.save_annotations(store, session_id, records)
        packet_list[hits[0]] = packets_mod.attach_annotation(
            packet, record.annotation_id, record.emotion_descriptor
        )
        packets_mod.save_packets(store, session_id, packet_list)
        return {"annotation_id": record.annotation_id}

    @app.post("/sessions/{session_id}/packets/{packet_id}/annotate")
    def trigger_annotation(session_id: str, packet_id: str, body: AnnotateBody):
        job_id = jobs.submit(lambda: _run_annotation(session_id, packet_id, body))
        return {"job_id": job_id, "state": "pending"}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        return jobs.get(job_id)

    @app.get("/sessions/{session_id}/annotations")
    def get_annotations(session_id: str):
        return {"annotations": [r.to_dict() for r in annotate_mod.load_annotations(store, session_id)]}

    @app.get("/sessions/{session_id}/annotations/{annotation_id}")
    def get_annotation(session_id: str, annotation_id: str):
        for r in annotate_mod.load_annotations(store, session_id):
            if r.annotation_id == annotation_id:
                return r.to_dict()
        raise NotFoundError(f"unknown annotation {annotation_id}")

    def _mutate_annotation(session_id: str, annotation_id: str, fn):
        records = annotate_mod.load_annotations(store, session_id)
        hits = [i for i, r in enumerate(records) if r.annotation_id == annotation_id]
        if not hits:
            raise NotFoundError(f"unknown annotation {annotation_id}")
        records[hits[0]] = fn(records[hits[0]])
        annotate_mod.save_annotations(store, session_id, records)
        return records[hits[0]].to_dict()

    @app.post("/sessions/{session_id}/annotations/{annotation_id}/edit")
    def edit_annotation(session_id: str, annotation_id: str, body: AnnotationEditBody):
        at = body.at_ms if body.at_ms is not None else packets_mod.now_ms()
        return _mutate_annotation(
            session_id, annotation_id,
            lambda r: annotate_mod.apply_annotation_edit(r, body.field, body.new_text, at),
        )

    @app.post("/sessions/{session_id}/annotations/{annotation_id}/action")
    def annotation_action(session_id: str, annotation_id: str, body: AnnotationActionBody):
        return _mutate_annotation(
            session_id, annotation_id,
            lambda r: annotate_mod.annotation_action(r, body.action),
        )

    # -- export ----------------------------------------------------------

    @app.post("/sessions/{session_id}/export")
    def trigger_export(session_id: str, body: ExportBody):
        payload = export_mod.export_session(store, session_id, body.states, body.states)
        path = store.write_export(session_id, payload)
        manifest = loads(payload.split(b"\n", 1)[0])
        return {"path": str(path), "record_count": manifest["record_count"]}

    @app.get("/sessions/{session_id}/export/file")
    def get_export_file(session_id: str):
        path = store.export_path(session_id)
        if not path.exists():
            raise NotFoundError(f"no export for session {session_id}")
        return Response(content=path.read_bytes(), media_type="application/x-ndjson")

    return app
