"""Deterministic per-modality describers feeding the annotation prompts.

Each describer reduces the packet window of one stream to a small feature
list plus a short templated summary. Everything here is a pure function, so
the same packet always produces the same prompt content.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .events import centered_mean
from .packets import EventPacket
from .store import SignalStream
from .timeline import AlignmentIndex, time_to_frame

FACE = "face"
MOTION = "motion"
PHYSIO = "physio"
CONTEXT = "context"

DEFAULT_FACE_THRESHOLD = 1.0


def _load_au_names() -> dict[str, str]:
    with resources.files("emoannot.data").joinpath("au_names.json").open("r", encoding="utf-8") as f:
        return json.load(f)


AU_NAMES = _load_au_names()


@dataclass
class ModalityDescriptor:
    modality: str
    features: list[tuple[str, object]]
    summary: str

    def to_dict(self) -> dict:
        return {
            "modality": self.modality,
            "features": [[k, v] for k, v in self.features],
            "summary": self.summary,
        }

    def feature(self, name: str):
        for k, v in self.features:
            if k == name:
                return v
        return None


def au_code(channel_name: str) -> str:
    """OpenFace channel name -> AU code (`AU12_r` -> `AU12`)."""
    return channel_name[:-2] if channel_name.endswith("_r") else channel_name


def au_text(code: str) -> str:
    return AU_NAMES.get(code, code)


def _window_indices(stream: SignalStream, boundary: tuple[int, int]) -> np.ndarray:
    ts = stream.timestamps_ms
    return np.nonzero((ts >= boundary[0]) & (ts <= boundary[1]))[0]


def describe_face(
    packet: EventPacket, au_stream: SignalStream, threshold: float = DEFAULT_FACE_THRESHOLD
) -> ModalityDescriptor:
    """AUs active at the packet anchor frame, named via the FACS lookup."""
    if au_stream.modality_kind != "au":
        raise InvalidInputError("describe_face needs an au stream")
    t0, t1 = au_stream.span_ms
    if packet.boundary[1] < t0 or packet.boundary[0] > t1:
        raise InvalidInputError("no AU stream in window")
    ts = au_stream.timestamps_ms
    anchor = packet.group.anchor_ms
    i = int(np.argmin(np.abs(ts - anchor)))  # nearest sample; argmin keeps the earlier tie
    row = au_stream.values[i]
    active = [
        (au_code(name), float(row[c]))
        for c, name in enumerate(au_stream.channel_names)
        if row[c] >= threshold
    ]
    active.sort(key=lambda kv: (-kv[1], kv[0]))
    if active:
        summary = ", ".join(au_text(code) for code, _ in active)
    else:
        summary = "neutral"
    return ModalityDescriptor(modality=FACE, features=active, summary=summary)


def describe_motion(
    packet: EventPacket, skeleton: SignalStream, root_joint: str = "root"
) -> ModalityDescriptor:
    """Posture/movement cues: speeds, top moving joints, root displacement."""
    if skeleton.modality_kind != "skeleton":
        raise InvalidInputError("describe_motion needs a skeleton stream")
    idx = _window_indices(skeleton, packet.boundary)
    if len(idx) < 2:
        raise InvalidInputError("describe_motion needs >= 2 samples in the window")
    n_joints = len(skeleton.channel_names) // 3
    joints = [skeleton.channel_names[j * 3].rsplit("_", 1)[0] for j in range(n_joints)]
    pos = skeleton.values[idx].reshape(len(idx), n_joints, 3)
    ts = skeleton.timestamps_ms[idx].astype(np.float64)

    speeds = np.zeros((len(idx) - 1, n_joints), dtype=np.float64)
    path = np.zeros(n_joints, dtype=np.float64)
    for i in range(len(idx) - 1):
        dt_s = (ts[i + 1] - ts[i]) / 1000.0
        step = np.linalg.norm(pos[i + 1] - pos[i], axis=1)
        speeds[i] = step / dt_s
        path += step

    mean_speed = float(np.mean(speeds))
    peak_speed = float(np.max(speeds))
    ranking = sorted(zip(joints, path), key=lambda kv: (-kv[1], kv[0]))
    top = [name for name, _ in ranking[:3]]
    root_idx = joints.index(root_joint) if root_joint in joints else 0
    root_disp = float(np.linalg.norm(pos[-1, root_idx] - pos[0, root_idx]))
    duration = int(ts[-1] - ts[0])

    features: list[tuple[str, object]] = [
        ("mean_speed_mps", mean_speed),
        ("peak_speed_mps", peak_speed),
        ("top_joints", ",".join(top)),
        ("root_displacement_m", root_disp),
        ("duration_ms", duration),
    ]
    if peak_speed < 1e-9:
        summary = "still"
    else:
        if peak_speed >= 1.0:
            size = "large"
        elif peak_speed >= 0.2:
            size = "moderate"
        else:
            size = "slight"
        summary = f"{size} movement led by {top[0]}, root displacement {root_disp:.2f} m"
    return ModalityDescriptor(modality=MOTION, features=features, summary=summary)


@dataclass
class TrendSegment:
    direction: str  # rising | falling
    start_ms: int
    end_ms: int
    amplitude: float  # signed value change over the segment

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms


def monotone_segments(
    ts: np.ndarray, values: np.ndarray, min_run_ms: int
) -> tuple[list[TrendSegment], list[tuple[str, int, float]]]:
    """Maximal rising/falling segments of a series, short runs merged away.

    Runs shorter than min_run_ms are absorbed into their longer neighbor
    (ties go left) until every run is long enough or only one remains.
    Flat runs never become segments. Also returns local extrema at
    rising/falling turning points as (kind, t_ms, value).
    """
    n = len(values)
    if n < 2:
        return [], []
    diffs = np.diff(values)
    signs = [0 if d == 0 else (1 if d > 0 else -1) for d in diffs]

    # runs over step indices [i0, i1] inclusive
    runs: list[list[int]] = []
    for i, s in enumerate(signs):
        if runs and runs[-1][0] == s:
            runs[-1][2] = i
        else:
            runs.append([s, i, i])

    def duration(run: list[int]) -> int:
        return int(ts[run[2] + 1] - ts[run[1]])

    def coalesce() -> None:
        i = 1
        while i < len(runs):
            if runs[i][0] == runs[i - 1][0]:
                runs[i - 1][2] = runs[i][2]
                del runs[i]
            else:
                i += 1

    while len(runs) > 1:
        short = [(duration(r), j) for j, r in enumerate(runs) if duration(r) < min_run_ms]
        if not short:
            break
        _, j = min(short, key=lambda dj: (dj[0], dj[1]))
        left = runs[j - 1] if j > 0 else None
        right = runs[j + 1] if j + 1 < len(runs) else None
        if left is not None and (right is None or duration(left) >= duration(right)):
            runs[j][0] = left[0]
        else:
            runs[j][0] = right[0]
        coalesce()

    segments = [
        TrendSegment(
            direction="rising" if r[0] > 0 else "falling",
            start_ms=int(ts[r[1]]),
            end_ms=int(ts[r[2] + 1]),
            amplitude=float(values[r[2] + 1] - values[r[1]]),
        )
        for r in runs
        if r[0] != 0
    ]
    extrema: list[tuple[str, int, float]] = []
    directional = [r for r in runs if r[0] != 0]
    for a, b in zip(directional, directional[1:]):
        boundary = a[2] + 1  # sample index between the two runs
        if a[0] > 0 and b[0] < 0:
            extrema.append(("max", int(ts[boundary]), float(values[boundary])))
        elif a[0] < 0 and b[0] > 0:
            extrema.append(("min", int(ts[boundary]), float(values[boundary])))
    return segments, extrema


def describe_physio(
    packet: EventPacket,
    stream: SignalStream,
    smooth_ms: int = 500,
    channel: Optional[str] = None,
) -> ModalityDescriptor:
    """Trend/peak descriptors: monotone segments, local extrema, duration."""
    if stream.modality_kind not in ("bvp", "hr", "eda", "imu"):
        raise InvalidInputError("describe_physio needs a physiological stream")
    if channel is None:
        channel = stream.channel_names[0]
    idx = _window_indices(stream, packet.boundary)
    if len(idx) < 3:
        raise InvalidInputError("describe_physio needs >= 3 samples in the window")
    ts = stream.timestamps_ms[idx]
    col = stream.channel_values(channel)[idx]
    smoothed = centered_mean(ts, col, smooth_ms)
    segments, extrema = monotone_segments(ts, smoothed, smooth_ms)

    duration = int(ts[-1] - ts[0])
    features: list[tuple[str, object]] = [
        ("channel", channel),
        ("duration_ms", duration),
        ("n_segments", len(segments)),
    ]
    for k, seg in enumerate(segments):
        features.append(
            (f"segment_{k}", f"{seg.direction} {seg.duration_ms} ms amplitude {seg.amplitude:+.4f}")
        )
    for kind, t, v in extrema:
        features.append((f"local_{kind}_at_ms", t))
        features.append((f"local_{kind}_value", v))

    name = stream.modality_kind.upper()
    if not segments:
        summary = f"{name} flat"
    else:
        phrase = " then ".join(f"{s.direction} {s.duration_ms / 1000.0:.1f} s" for s in segments)
        summary = f"{name} {phrase}"
        maxima = [e for e in extrema if e[0] == "max"]
        if maxima:
            summary += f", peak at {maxima[0][1] / 1000.0:.1f} s"
    return ModalityDescriptor(modality=PHYSIO, features=features, summary=summary)


def describe_context(packet: EventPacket, index: AlignmentIndex) -> Optional[ModalityDescriptor]:
    """First-person keyframe references at the boundary edges and anchor.

    Returns None when the session has no first-person video; the actual
    context description is produced by the LLM, not here.
    """
    fpv = sorted((v for v in index.videos if v.kind == "first_person"), key=lambda v: v.video_id)
    if not fpv:
        return None
    video = fpv[0]
    start, end = packet.boundary
    anchor = packet.group.anchor_ms
    frames = {
        "frame_start": time_to_frame(index, video.video_id, start),
        "frame_anchor": time_to_frame(index, video.video_id, anchor),
        "frame_end": time_to_frame(index, video.video_id, end),
    }
    clamped = any(t < video.offset_ms or t > video.last_ms for t in (start, anchor, end))
    features: list[tuple[str, object]] = [
        ("video_id", video.video_id),
        ("uri", video.uri),
        ("frame_start", frames["frame_start"]),
        ("frame_anchor", frames["frame_anchor"]),
        ("frame_end", frames["frame_end"]),
        ("clamped", clamped),
    ]
    summary = (
        f"first-person keyframes {frames['frame_start']}/{frames['frame_anchor']}/{frames['frame_end']}"
        f" of {video.video_id}"
    )
    return ModalityDescriptor(modality=CONTEXT, features=features, summary=summary)
