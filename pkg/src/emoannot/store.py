"""Session catalog and durable flat-file storage.

Layout (one directory tree per session, one file per blob kind):

    <root>/<participant>/<scene>/<session>/
        meta.json
        streams/<stream_id>.tsv          # header: t_ms <TAB> channel...
        streams/<stream_id>.report.json  # parse report incl. gap intervals
        index.json
        events.json
        packets.json
        annotations.json
        export.jsonl
        revisions.json                   # per-blob revision counters

Writes are atomic (tmp file + os.replace) and serialized per session;
readers never observe a torn blob. A blob's revision counter only advances
when its bytes actually change, so re-running a pipeline stage on identical
inputs leaves the store byte-stable.
"""

from __future__ import annotations

import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import ConflictError, InvalidInputError, NotFoundError
from .jsonio import dumps_canonical, loads

MODALITY_KINDS = ("au", "skeleton", "bvp", "hr", "eda", "imu")
VIDEO_KINDS = ("face_avatar", "first_person", "rendered_signal")
BLOB_KINDS = ("stream", "index", "events", "packets", "annotations")

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


def _check_id(value: str, what: str) -> str:
    if not isinstance(value, str) or not _ID_RE.match(value):
        raise InvalidInputError(f"bad {what}: {value!r} (alphanumeric, '._-' allowed)")
    return value


@dataclass
class StreamEntry:
    """One declared stream in a session manifest."""

    stream_id: str
    modality_kind: str
    declared_rate_hz: float
    source_path: str = ""

    def validate(self) -> None:
        _check_id(self.stream_id, "stream_id")
        if self.modality_kind not in MODALITY_KINDS:
            raise InvalidInputError(f"unknown modality_kind {self.modality_kind!r}")
        if not self.declared_rate_hz > 0:
            raise InvalidInputError(f"declared_rate_hz must be > 0 for {self.stream_id}")

    def to_dict(self) -> dict:
        return {
            "stream_id": self.stream_id,
            "modality_kind": self.modality_kind,
            "declared_rate_hz": self.declared_rate_hz,
            "source_path": self.source_path,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StreamEntry":
        return cls(d["stream_id"], d["modality_kind"], d["declared_rate_hz"], d.get("source_path", ""))


@dataclass
class VideoTrackRef:
    """Reference to an externally stored video track (no media bytes in the store)."""

    video_id: str
    uri: str
    fps: float
    frame_count: int
    offset_ms: int = 0
    kind: str = "face_avatar"
    source_stream_id: Optional[str] = None  # required when kind == rendered_signal

    def validate(self) -> None:
        _check_id(self.video_id, "video_id")
        if not self.fps > 0:
            raise InvalidInputError(f"fps must be > 0 for {self.video_id}")
        if self.frame_count < 0:
            raise InvalidInputError(f"frame_count must be >= 0 for {self.video_id}")
        if self.kind not in VIDEO_KINDS:
            raise InvalidInputError(f"unknown video kind {self.kind!r}")
        if self.kind == "rendered_signal" and not self.source_stream_id:
            raise InvalidInputError(f"rendered_signal video {self.video_id} must name its source_stream_id")

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "uri": self.uri,
            "fps": self.fps,
            "frame_count": self.frame_count,
            "offset_ms": self.offset_ms,
            "kind": self.kind,
            "source_stream_id": self.source_stream_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VideoTrackRef":
        return cls(
            d["video_id"], d["uri"], d["fps"], d["frame_count"],
            d.get("offset_ms", 0), d.get("kind", "face_avatar"), d.get("source_stream_id"),
        )


@dataclass
class SessionMeta:
    """Session identity plus its stream and video manifests."""

    session_id: str
    participant_id: str
    scene_id: str
    recording_epoch_ms: int
    stream_manifest: list[StreamEntry] = field(default_factory=list)
    video_manifest: list[VideoTrackRef] = field(default_factory=list)

    def validate(self, scenes: Optional[Iterable[str]] = None) -> None:
        _check_id(self.session_id, "session_id")
        _check_id(self.participant_id, "participant_id")
        _check_id(self.scene_id, "scene_id")
        if scenes is not None and self.scene_id not in set(scenes):
            raise InvalidInputError(f"scene_id {self.scene_id!r} not in configured scene list")
        seen: set[str] = set()
        for entry in self.stream_manifest:
            entry.validate()
            if entry.stream_id in seen:
                raise InvalidInputError(f"duplicate stream_id {entry.stream_id}")
            seen.add(entry.stream_id)
        vseen: set[str] = set()
        for vid in self.video_manifest:
            vid.validate()
            if vid.video_id in vseen or vid.video_id in seen:
                raise InvalidInputError(f"duplicate video_id {vid.video_id}")
            vseen.add(vid.video_id)

    def stream_entry(self, stream_id: str) -> StreamEntry:
        for entry in self.stream_manifest:
            if entry.stream_id == stream_id:
                return entry
        raise NotFoundError(f"stream {stream_id} not in session {self.session_id}")

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "participant_id": self.participant_id,
            "scene_id": self.scene_id,
            "recording_epoch_ms": self.recording_epoch_ms,
            "stream_manifest": [s.to_dict() for s in self.stream_manifest],
            "video_manifest": [v.to_dict() for v in self.video_manifest],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionMeta":
        return cls(
            session_id=d["session_id"],
            participant_id=d["participant_id"],
            scene_id=d["scene_id"],
            recording_epoch_ms=d["recording_epoch_ms"],
            stream_manifest=[StreamEntry.from_dict(s) for s in d.get("stream_manifest", [])],
            video_manifest=[VideoTrackRef.from_dict(v) for v in d.get("video_manifest", [])],
        )


@dataclass
class SignalStream:
    """Timestamped multi-channel numeric series for one modality.

    Timestamps are integer milliseconds relative to the session recording
    epoch and strictly increasing. Values are a (n_samples, n_channels)
    float matrix; NaN cells are only legal inside a flagged gap interval.
    """

    stream_id: str
    modality_kind: str
    channel_names: list[str]
    timestamps_ms: np.ndarray
    values: np.ndarray
    rate_hz: float
    gaps: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.timestamps_ms = np.asarray(self.timestamps_ms, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 1:
            self.values = self.values.reshape(-1, 1)

    @property
    def n_samples(self) -> int:
        return int(self.timestamps_ms.shape[0])

    @property
    def span_ms(self) -> tuple[int, int]:
        if self.n_samples == 0:
            return (0, 0)
        return (int(self.timestamps_ms[0]), int(self.timestamps_ms[-1]))

    @property
    def period_ms(self) -> float:
        return 1000.0 / self.rate_hz

    def channel_index(self, channel: str) -> int:
        try:
            return self.channel_names.index(channel)
        except ValueError:
            raise NotFoundError(f"unknown channel {channel!r} in stream {self.stream_id}") from None

    def channel_values(self, channel: str) -> np.ndarray:
        return self.values[:, self.channel_index(channel)]

    def in_gap(self, t_ms: int) -> bool:
        return any(start <= t_ms <= end for start, end in self.gaps)

    def validate(self) -> None:
        if self.modality_kind not in MODALITY_KINDS:
            raise InvalidInputError(f"unknown modality_kind {self.modality_kind!r}")
        if not self.rate_hz > 0:
            raise InvalidInputError("rate_hz must be > 0")
        n = self.n_samples
        if self.values.shape != (n, len(self.channel_names)):
            raise InvalidInputError(
                f"values shape {self.values.shape} does not match "
                f"{n} samples x {len(self.channel_names)} channels"
            )
        if n > 1 and not np.all(np.diff(self.timestamps_ms) > 0):
            raise InvalidInputError("timestamps must be strictly increasing")
        bad = ~np.isfinite(self.values)
        if bad.any():
            for row in np.unique(np.nonzero(bad)[0]):
                t = int(self.timestamps_ms[row])
                if not self.in_gap(t):
                    raise InvalidInputError(f"non-finite value at t={t} ms outside any flagged gap")
        prev_end = None
        for start, end in self.gaps:
            if start > end:
                raise InvalidInputError(f"gap interval ({start}, {end}) inverted")
            if prev_end is not None and start <= prev_end:
                raise InvalidInputError("gap intervals must be sorted and non-overlapping")
            prev_end = end


def stream_to_tsv(stream: SignalStream) -> bytes:
    """Columnar text form: header `t_ms` + channel names, one row per sample."""
    lines = ["\t".join(["t_ms"] + list(stream.channel_names))]
    for i in range(stream.n_samples):
        row = [str(int(stream.timestamps_ms[i]))]
        row.extend(repr(float(v)) for v in stream.values[i])
        lines.append("\t".join(row))
    return ("\n".join(lines) + "\n").encode("utf-8")


def stream_from_tsv(
    data: bytes,
    stream_id: str,
    modality_kind: str,
    rate_hz: float,
    gaps: Optional[list[tuple[int, int]]] = None,
) -> SignalStream:
    text = data.decode("utf-8")
    lines = [ln for ln in text.splitlines() if ln]
    if not lines:
        raise InvalidInputError(f"empty stream file for {stream_id}")
    header = lines[0].split("\t")
    if header[:1] != ["t_ms"]:
        raise InvalidInputError(f"stream TSV for {stream_id} must start with a t_ms column")
    channels = header[1:]
    ts: list[int] = []
    rows: list[list[float]] = []
    for ln in lines[1:]:
        parts = ln.split("\t")
        if len(parts) != len(header):
            raise InvalidInputError(f"row width mismatch in stream {stream_id}")
        ts.append(int(parts[0]))
        rows.append([float(x) for x in parts[1:]])
    stream = SignalStream(
        stream_id=stream_id,
        modality_kind=modality_kind,
        channel_names=channels,
        timestamps_ms=np.array(ts, dtype=np.int64),
        values=np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(channels))),
        rate_hz=rate_hz,
        gaps=list(gaps or []),
    )
    return stream


class SessionStore:
    """Flat-file session store; single writer per session, concurrent readers."""

    def __init__(self, root: str | Path, scenes: Optional[list[str]] = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.scenes = scenes
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    # -- locking ---------------------------------------------------------

    def _lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    # -- paths -----------------------------------------------------------

    def _session_dirs(self) -> list[Path]:
        return sorted(p.parent for p in self.root.glob("*/*/*/meta.json"))

    def session_dir(self, session_id: str) -> Path:
        for d in self._session_dirs():
            if d.name == session_id:
                return d
        raise NotFoundError(f"unknown session {session_id}")

    @staticmethod
    def _blob_path(session_dir: Path, kind: str, name: Optional[str]) -> Path:
        if kind == "stream":
            if not name:
                raise InvalidInputError("stream blobs need a name")
            return session_dir / "streams" / f"{name}.tsv"
        if kind in ("index", "events", "packets", "annotations"):
            return session_dir / f"{kind}.json"
        raise InvalidInputError(f"unknown blob kind {kind!r}")

    @staticmethod
    def _atomic_write(path: Path, payload: bytes) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(payload)
        os.replace(tmp, path)

    # -- sessions --------------------------------------------------------

    def put_session(self, meta: SessionMeta) -> str:
        meta.validate(self.scenes)
        payload = dumps_canonical(meta.to_dict())
        with self._lock(meta.session_id):
            try:
                existing_dir = self.session_dir(meta.session_id)
            except NotFoundError:
                existing_dir = None
            if existing_dir is not None:
                if existing_dir.joinpath("meta.json").read_bytes() != payload:
                    raise ConflictError(f"session {meta.session_id} already stored with a different payload")
                return meta.session_id
            d = self.root / meta.participant_id / meta.scene_id / meta.session_id
            self._atomic_write(d / "meta.json", payload)
        return meta.session_id

    def get_session(self, session_id: str) -> SessionMeta:
        d = self.session_dir(session_id)
        return SessionMeta.from_dict(loads(d.joinpath("meta.json").read_bytes()))

    def list_sessions(
        self, participant: Optional[str] = None, scene: Optional[str] = None
    ) -> list[SessionMeta]:
        out = []
        for d in self._session_dirs():
            meta = SessionMeta.from_dict(loads(d.joinpath("meta.json").read_bytes()))
            if participant is not None and meta.participant_id != participant:
                continue
            if scene is not None and meta.scene_id != scene:
                continue
            out.append(meta)
        out.sort(key=lambda m: (m.participant_id, m.scene_id, m.session_id))
        return out

    # -- blobs -----------------------------------------------------------

    def put_blob(self, session_id: str, kind: str, payload: bytes, name: Optional[str] = None) -> None:
        if kind not in BLOB_KINDS:
            raise InvalidInputError(f"unknown blob kind {kind!r}")
        with self._lock(session_id):
            d = self.session_dir(session_id)
            path = self._blob_path(d, kind, name)
            if path.exists() and path.read_bytes() == payload:
                return  # byte-identical rewrite: keep store (and revision) stable
            self._atomic_write(path, payload)
            self._bump_revision(d, kind, name)

    def get_blob(self, session_id: str, kind: str, name: Optional[str] = None) -> bytes:
        d = self.session_dir(session_id)
        path = self._blob_path(d, kind, name)
        if not path.exists():
            raise NotFoundError(f"no {kind} blob for session {session_id}" + (f" ({name})" if name else ""))
        return path.read_bytes()

    def _bump_revision(self, session_dir: Path, kind: str, name: Optional[str]) -> None:
        path = session_dir / "revisions.json"
        revisions = loads(path.read_bytes()) if path.exists() else {}
        key = f"{kind}/{name}" if name else kind
        revisions[key] = revisions.get(key, 0) + 1
        self._atomic_write(path, dumps_canonical(revisions))

    def blob_revision(self, session_id: str, kind: str, name: Optional[str] = None) -> int:
        d = self.session_dir(session_id)
        path = d / "revisions.json"
        if not path.exists():
            return 0
        key = f"{kind}/{name}" if name else kind
        return loads(path.read_bytes()).get(key, 0)

    # -- typed stream helpers ---------------------------------------------

    def put_stream(self, session_id: str, stream: SignalStream, report: Optional[dict] = None) -> None:
        stream.validate()
        self.put_blob(session_id, "stream", stream_to_tsv(stream), name=stream.stream_id)
        sidecar = {"gaps": [[int(a), int(b)] for a, b in stream.gaps]}
        if report is not None:
            sidecar["report"] = report
        with self._lock(session_id):
            d = self.session_dir(session_id)
            path = d / "streams" / f"{stream.stream_id}.report.json"
            payload = dumps_canonical(sidecar)
            if not (path.exists() and path.read_bytes() == payload):
                self._atomic_write(path, payload)

    def get_stream(self, session_id: str, stream_id: str) -> SignalStream:
        meta = self.get_session(session_id)
        entry = meta.stream_entry(stream_id)
        data = self.get_blob(session_id, "stream", name=stream_id)
        gaps: list[tuple[int, int]] = []
        sidecar = self.session_dir(session_id) / "streams" / f"{stream_id}.report.json"
        if sidecar.exists():
            gaps = [tuple(g) for g in loads(sidecar.read_bytes()).get("gaps", [])]
        return stream_from_tsv(data, stream_id, entry.modality_kind, entry.declared_rate_hz, gaps)

    def get_parse_report(self, session_id: str, stream_id: str) -> Optional[dict]:
        sidecar = self.session_dir(session_id) / "streams" / f"{stream_id}.report.json"
        if not sidecar.exists():
            return None
        return loads(sidecar.read_bytes()).get("report")

    # -- export file (not a blob kind: written once per export run) -------

    def export_path(self, session_id: str) -> Path:
        return self.session_dir(session_id) / "export.jsonl"

    def write_export(self, session_id: str, payload: bytes) -> Path:
        with self._lock(session_id):
            path = self.export_path(session_id)
            self._atomic_write(path, payload)
        return path


def clone_stream(stream: SignalStream, **overrides) -> SignalStream:
    """Copy a stream with field overrides (arrays are not shared)."""
    base = dict(
        stream_id=stream.stream_id,
        modality_kind=stream.modality_kind,
        channel_names=list(stream.channel_names),
        timestamps_ms=stream.timestamps_ms.copy(),
        values=stream.values.copy(),
        rate_hz=stream.rate_hz,
        gaps=list(stream.gaps),
    )
    base.update(overrides)
    return SignalStream(**base)


__all__ = [
    "MODALITY_KINDS",
    "VIDEO_KINDS",
    "BLOB_KINDS",
    "StreamEntry",
    "VideoTrackRef",
    "SessionMeta",
    "SignalStream",
    "SessionStore",
    "stream_to_tsv",
    "stream_from_tsv",
    "clone_stream",
]
