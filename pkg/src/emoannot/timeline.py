"""Unified time axis: alignment index, window retrieval, track rendering.

The index reduces every stream and video to (offset_ms, rate, count); window
retrieval is pure arithmetic over that model, so results are reproducible
across persist/load and across processes. Windows are closed on timestamps
and half-open on indices; a boundary tie includes the sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError, NotFoundError
from .jsonio import dumps_canonical, loads
from .store import SessionMeta, SessionStore, SignalStream

# Absolute-ish tolerance used to snap float index positions that are within
# rounding noise of an integer, so boundary samples are classified stably.
_SNAP = 1e-9


def _snap(x: float) -> float:
    r = round(x)
    if abs(x - r) <= _SNAP * max(1.0, abs(x)):
        return float(r)
    return x


@dataclass
class StreamIndexEntry:
    stream_id: str
    modality_kind: str
    offset_ms: int
    rate_hz: float
    sample_count: int

    @property
    def last_ms(self) -> int:
        if self.sample_count == 0:
            return self.offset_ms
        return self.offset_ms + int(round((self.sample_count - 1) * 1000.0 / self.rate_hz))

    def to_dict(self) -> dict:
        return {
            "stream_id": self.stream_id,
            "modality_kind": self.modality_kind,
            "offset_ms": self.offset_ms,
            "rate_hz": self.rate_hz,
            "sample_count": self.sample_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StreamIndexEntry":
        return cls(d["stream_id"], d["modality_kind"], d["offset_ms"], d["rate_hz"], d["sample_count"])


@dataclass
class VideoIndexEntry:
    video_id: str
    kind: str
    uri: str
    offset_ms: int
    fps: float
    frame_count: int

    @property
    def last_ms(self) -> int:
        if self.frame_count == 0:
            return self.offset_ms
        return self.offset_ms + int(round((self.frame_count - 1) * 1000.0 / self.fps))

    @property
    def end_ms(self) -> int:
        return self.offset_ms + int(round(self.frame_count * 1000.0 / self.fps))

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "kind": self.kind,
            "uri": self.uri,
            "offset_ms": self.offset_ms,
            "fps": self.fps,
            "frame_count": self.frame_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VideoIndexEntry":
        return cls(d["video_id"], d["kind"], d["uri"], d["offset_ms"], d["fps"], d["frame_count"])


@dataclass
class AlignmentIndex:
    """Persisted mapping from the unified session axis to samples and frames."""

    session_id: str
    t0_ms: int
    t1_ms: int
    streams: list[StreamIndexEntry] = field(default_factory=list)
    videos: list[VideoIndexEntry] = field(default_factory=list)
    index_revision: int = 1

    def stream(self, stream_id: str) -> StreamIndexEntry:
        for s in self.streams:
            if s.stream_id == stream_id:
                return s
        raise NotFoundError(f"stream {stream_id} not in index for {self.session_id}")

    def video(self, video_id: str) -> VideoIndexEntry:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise NotFoundError(f"video {video_id} not in index for {self.session_id}")

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "t0_ms": self.t0_ms,
            "t1_ms": self.t1_ms,
            "streams": [s.to_dict() for s in self.streams],
            "videos": [v.to_dict() for v in self.videos],
            "index_revision": self.index_revision,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AlignmentIndex":
        return cls(
            session_id=d["session_id"],
            t0_ms=d["t0_ms"],
            t1_ms=d["t1_ms"],
            streams=[StreamIndexEntry.from_dict(s) for s in d["streams"]],
            videos=[VideoIndexEntry.from_dict(v) for v in d["videos"]],
            index_revision=d.get("index_revision", 1),
        )


@dataclass
class WindowRef:
    """Half-open sample/frame range answering one time-window query."""

    target_id: str
    start_idx: int
    end_idx: int
    start_ms: int
    end_ms: int
    out_of_span: bool = False

    def __post_init__(self) -> None:
        if not (0 <= self.start_idx <= self.end_idx):
            raise InvalidInputError(f"inverted index range [{self.start_idx}, {self.end_idx})")

    @property
    def count(self) -> int:
        return self.end_idx - self.start_idx

    def to_dict(self) -> dict:
        return {
            "target_id": self.target_id,
            "start_idx": self.start_idx,
            "end_idx": self.end_idx,
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "out_of_span": self.out_of_span,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WindowRef":
        return cls(
            d["target_id"], d["start_idx"], d["end_idx"], d["start_ms"], d["end_ms"],
            d.get("out_of_span", False),
        )


def build_alignment_index(meta: SessionMeta, streams: list[SignalStream]) -> AlignmentIndex:
    """Derive the unified axis from parsed streams and the video manifest.

    Every manifest stream must be provided (and nothing extra); the axis
    spans the earliest start to the latest end over all tracks.
    """
    provided = {s.stream_id: s for s in streams}
    manifest_ids = [e.stream_id for e in meta.stream_manifest]
    missing = [sid for sid in manifest_ids if sid not in provided]
    extra = [sid for sid in provided if sid not in manifest_ids]
    if missing or extra:
        raise InvalidInputError(
            f"manifest/stream mismatch for {meta.session_id}: missing={missing} extra={extra}"
        )

    s_entries = []
    for entry in sorted(meta.stream_manifest, key=lambda e: e.stream_id):
        stream = provided[entry.stream_id]
        if stream.n_samples == 0:
            raise InvalidInputError(f"stream {entry.stream_id} is empty")
        s_entries.append(
            StreamIndexEntry(
                stream_id=entry.stream_id,
                modality_kind=stream.modality_kind,
                offset_ms=int(stream.timestamps_ms[0]),
                rate_hz=stream.rate_hz,
                sample_count=stream.n_samples,
            )
        )
    v_entries = [
        VideoIndexEntry(
            video_id=v.video_id, kind=v.kind, uri=v.uri,
            offset_ms=v.offset_ms, fps=v.fps, frame_count=v.frame_count,
        )
        for v in sorted(meta.video_manifest, key=lambda v: v.video_id)
    ]

    starts = [e.offset_ms for e in s_entries] + [v.offset_ms for v in v_entries]
    ends = [int(s.timestamps_ms[-1]) for s in provided.values()] + [v.end_ms for v in v_entries]
    t0 = min(starts) if starts else 0
    t1 = max(ends) if ends else 0
    return AlignmentIndex(
        session_id=meta.session_id, t0_ms=t0, t1_ms=t1,
        streams=s_entries, videos=v_entries, index_revision=1,
    )


def _target_params(index: AlignmentIndex, target_id: str) -> tuple[int, float, int]:
    """(offset_ms, samples-or-frames per second, count) for a stream or video."""
    for s in index.streams:
        if s.stream_id == target_id:
            return s.offset_ms, s.rate_hz, s.sample_count
    for v in index.videos:
        if v.video_id == target_id:
            return v.offset_ms, v.fps, v.frame_count
    raise NotFoundError(f"unknown target {target_id}")


def window_to_ref(index: AlignmentIndex, target_id: str, start_ms: int, end_ms: int) -> WindowRef:
    """Minimal index range covering every sample with timestamp in [start, end]."""
    if start_ms > end_ms:
        raise InvalidInputError(f"window start {start_ms} > end {end_ms}")
    offset, rate, count = _target_params(index, target_id)
    x_start = _snap((start_ms - offset) * rate / 1000.0)
    x_end = _snap((end_ms - offset) * rate / 1000.0)
    start_idx = max(0, min(count, int(math.ceil(x_start))))
    end_idx = max(0, min(count, int(math.floor(x_end)) + 1))
    if start_idx > end_idx:
        start_idx = end_idx
    last_ms = offset + int(round((count - 1) * 1000.0 / rate)) if count else offset
    out_of_span = count == 0 or end_ms < offset or start_ms > last_ms
    return WindowRef(
        target_id=target_id,
        start_idx=start_idx,
        end_idx=end_idx,
        start_ms=start_ms,
        end_ms=end_ms,
        out_of_span=out_of_span,
    )


def time_to_frame(index: AlignmentIndex, video_id: str, t_ms: int) -> int:
    """Frame under the cursor at t_ms, clamped into the video's span."""
    v = index.video(video_id)
    if v.frame_count == 0:
        return 0
    raw = int(math.floor(_snap((t_ms - v.offset_ms) * v.fps / 1000.0)))
    return max(0, min(v.frame_count - 1, raw))


def sample_time(entry: StreamIndexEntry, idx: int) -> int:
    """Model timestamp of one sample under the index's uniform grid."""
    return entry.offset_ms + int(round(idx * 1000.0 / entry.rate_hz))


def slice_window(stream: SignalStream, ref: WindowRef) -> tuple[list[int], list[list[float]]]:
    """Dereference a WindowRef against the actual stream rows."""
    ts = [int(t) for t in stream.timestamps_ms[ref.start_idx : ref.end_idx]]
    vals = [[float(v) for v in row] for row in stream.values[ref.start_idx : ref.end_idx]]
    return ts, vals


def downsample_envelope(
    stream: SignalStream, channel: str, bucket_ms: int
) -> list[tuple[int, float, float]]:
    """Per-bucket (start_ms, min, max) summary of one channel.

    Buckets are half-open [t0 + k*b, t0 + (k+1)*b); the final bucket is
    right-closed so the stream's last sample never opens a new bucket.
    NaN (gap) samples are skipped; empty buckets are omitted.
    """
    if bucket_ms <= 0:
        raise InvalidInputError("bucket_ms must be > 0")
    col = stream.channel_values(channel)
    n = stream.n_samples
    if n == 0:
        return []
    t0 = int(stream.timestamps_ms[0])
    span = int(stream.timestamps_ms[-1]) - t0
    max_k = 0 if span == 0 else (span + bucket_ms - 1) // bucket_ms - 1
    buckets: dict[int, tuple[float, float]] = {}
    for i in range(n):
        v = float(col[i])
        if math.isnan(v):
            continue
        k = (int(stream.timestamps_ms[i]) - t0) // bucket_ms
        k = min(k, max_k)
        if k in buckets:
            lo, hi = buckets[k]
            buckets[k] = (min(lo, v), max(hi, v))
        else:
            buckets[k] = (v, v)
    return [(t0 + k * bucket_ms, lo, hi) for k, (lo, hi) in sorted(buckets.items())]


def windowed_envelope(
    index: AlignmentIndex,
    stream: SignalStream,
    channel: str,
    start_ms: int,
    end_ms: int,
    bucket_ms: int,
) -> list[tuple[int, float, float]]:
    """Envelope tiles restricted to one time window (UI zoom fetches)."""
    ref = window_to_ref(index, stream.stream_id, start_ms, end_ms)
    if ref.count == 0:
        return []
    sub = SignalStream(
        stream_id=stream.stream_id,
        modality_kind=stream.modality_kind,
        channel_names=list(stream.channel_names),
        timestamps_ms=stream.timestamps_ms[ref.start_idx : ref.end_idx],
        values=stream.values[ref.start_idx : ref.end_idx],
        rate_hz=stream.rate_hz,
        gaps=list(stream.gaps),
    )
    return downsample_envelope(sub, channel, bucket_ms)


@dataclass
class RenderView:
    """Rasterization parameters for signal-as-video-track rendering."""

    start_ms: int
    end_ms: int
    width_px: int = 320
    height_px: int = 120
    fps: float = 10.0
    window_ms: int = 2000  # sliding window length; cursor sits at its right edge
    channel: Optional[str] = None  # None: stack all channels


_BG = (255, 255, 255)
_FG = (20, 20, 20)
_CURSOR = (220, 40, 40)


def _draw_line(img: np.ndarray, x0: int, y0: int, x1: int, y1: int, color: tuple) -> None:
    """Integer Bresenham segment, clipped to the raster."""
    h, w, _ = img.shape
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        if 0 <= x < w and 0 <= y < h:
            img[y, x] = color
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def _to_ppm(img: np.ndarray) -> bytes:
    h, w, _ = img.shape
    return b"P6\n%d %d\n255\n" % (w, h) + img.astype(np.uint8).tobytes()


def render_signal_frames(stream: SignalStream, view: RenderView) -> list[bytes]:
    """Deterministic PPM (P6) frame sequence for one stream.

    Each frame shows the selected channel(s) over a sliding window ending at
    the frame time, with a cursor column at the right edge. Vertical scaling
    is fixed once from the full view span, so identical inputs rasterize to
    identical bytes.
    """
    if view.width_px <= 0 or view.height_px <= 0:
        raise InvalidInputError("raster size must be positive")
    if view.end_ms <= view.start_ms:
        raise InvalidInputError("view span must be positive")
    if view.window_ms <= 0:
        raise InvalidInputError("window_ms must be > 0")
    if stream.n_samples == 0:
        raise InvalidInputError("empty stream")

    if view.channel is not None:
        ch_idx = [stream.channel_index(view.channel)]
    else:
        ch_idx = list(range(len(stream.channel_names)))

    ts = stream.timestamps_ms
    in_view = (ts >= view.start_ms) & (ts <= view.end_ms)
    if not in_view.any():
        raise InvalidInputError("no samples in view span")

    # fixed vertical scale per channel over the full view span
    scales: list[tuple[float, float]] = []
    for c in ch_idx:
        col = stream.values[in_view, c]
        col = col[np.isfinite(col)]
        if col.size == 0:
            scales.append((0.0, 1.0))
            continue
        lo, hi = float(col.min()), float(col.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        scales.append((lo, hi))

    w, h = view.width_px, view.height_px
    band_h = h // len(ch_idx)
    if band_h <= 0:
        raise InvalidInputError("raster too short for channel count")

    n_frames = int(math.floor((view.end_ms - view.start_ms) * view.fps / 1000.0 + 1e-9)) + 1
    frames: list[bytes] = []
    for k in range(n_frames):
        t = view.start_ms + k * 1000.0 / view.fps
        img = np.full((h, w, 3), _BG, dtype=np.uint8)
        for band, c in enumerate(ch_idx):
            lo, hi = scales[band]
            top = band * band_h
            sel = (ts >= t - view.window_ms) & (ts <= t)
            idxs = np.nonzero(sel)[0]
            pts: list[tuple[int, int]] = []
            for i in idxs:
                v = stream.values[i, c]
                if not np.isfinite(v):
                    pts.append((-1, -1))  # gap breaks the polyline
                    continue
                x = int(round((float(ts[i]) - (t - view.window_ms)) / view.window_ms * (w - 1)))
                y = top + int(round((1.0 - (float(v) - lo) / (hi - lo)) * (band_h - 1)))
                pts.append((x, y))
            prev: Optional[tuple[int, int]] = None
            for p in pts:
                if p == (-1, -1):
                    prev = None
                    continue
                if prev is not None:
                    _draw_line(img, prev[0], prev[1], p[0], p[1], _FG)
                else:
                    _draw_line(img, p[0], p[1], p[0], p[1], _FG)
                prev = p
        img[:, w - 1] = _CURSOR
        frames.append(_to_ppm(img))
    return frames


# -- persistence --------------------------------------------------------


def save_index(store: SessionStore, index: AlignmentIndex) -> None:
    store.put_blob(index.session_id, "index", dumps_canonical(index.to_dict()))


def load_index(store: SessionStore, session_id: str) -> AlignmentIndex:
    return AlignmentIndex.from_dict(loads(store.get_blob(session_id, "index")))


__all__ = [
    "StreamIndexEntry",
    "VideoIndexEntry",
    "AlignmentIndex",
    "WindowRef",
    "RenderView",
    "build_alignment_index",
    "window_to_ref",
    "time_to_frame",
    "sample_time",
    "slice_window",
    "downsample_envelope",
    "windowed_envelope",
    "render_signal_frames",
    "save_index",
    "load_index",
]
