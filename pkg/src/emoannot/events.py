"""Candidate event mining: AU peaks, motion energy, physio peaks and trends.

Detection semantics are deliberately pinned down to the sample:

  * local maxima resolve plateaus to the earliest sample, and stream
    endpoints are never peaks;
  * prominence is the peak value minus the higher of the two flanking
    minima, scanning out to the nearest strictly higher local maximum or
    the stream boundary;
  * minimum-separation conflicts keep the higher peak (tie: earlier);
  * thresholded runs are maximal and closed (value >= threshold).

Every detector is a pure function of (stream, params); events carry a
params digest so each one is reproducible from its parameters.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .jsonio import digest12, dumps_compact, dumps_canonical, loads
from .store import SessionStore, SignalStream

AU_PEAK = "au_peak"
MOTION_ENERGY = "motion_energy"
PHYSIO_PEAK = "physio_peak"
PHYSIO_TREND = "physio_trend"


@dataclass(frozen=True)
class AuParams:
    min_intensity: float = 1.0
    min_prominence: float = 0.5
    min_separation_ms: int = 1000
    half_window_ms: int = 1500


@dataclass(frozen=True)
class MotionParams:
    frame_window_ms: int = 200
    threshold_k: float = 2.0
    min_duration_ms: int = 300


@dataclass(frozen=True)
class PhysioParams:
    # EDA reacts slowly; pulse-rate signals (BVP/HR) and IMU need a shorter smoother.
    smooth_eda_ms: int = 500
    smooth_pulse_ms: int = 100
    z_threshold: float = 3.0
    slope_window_ms: int = 2000
    slope_delta: float = 0.5  # units per second

    def smooth_for(self, modality_kind: str) -> int:
        return self.smooth_eda_ms if modality_kind == "eda" else self.smooth_pulse_ms


@dataclass(frozen=True)
class DetectorParams:
    au: AuParams = field(default_factory=AuParams)
    motion: MotionParams = field(default_factory=MotionParams)
    physio: PhysioParams = field(default_factory=PhysioParams)
    merge_gap_ms: int = 500

    def validate(self) -> None:
        for name, value in (
            ("au.min_separation_ms", self.au.min_separation_ms),
            ("au.half_window_ms", self.au.half_window_ms),
            ("motion.frame_window_ms", self.motion.frame_window_ms),
            ("motion.min_duration_ms", self.motion.min_duration_ms),
            ("physio.smooth_eda_ms", self.physio.smooth_eda_ms),
            ("physio.smooth_pulse_ms", self.physio.smooth_pulse_ms),
            ("physio.slope_window_ms", self.physio.slope_window_ms),
            ("merge_gap_ms", self.merge_gap_ms),
        ):
            if value <= 0:
                raise InvalidInputError(f"{name} must be > 0")
        for name, value in (
            ("au.min_intensity", self.au.min_intensity),
            ("au.min_prominence", self.au.min_prominence),
            ("motion.threshold_k", self.motion.threshold_k),
            ("physio.z_threshold", self.physio.z_threshold),
            ("physio.slope_delta", self.physio.slope_delta),
        ):
            if value < 0:
                raise InvalidInputError(f"{name} must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorParams":
        return cls(
            au=AuParams(**d.get("au", {})),
            motion=MotionParams(**d.get("motion", {})),
            physio=PhysioParams(**d.get("physio", {})),
            merge_gap_ms=d.get("merge_gap_ms", 500),
        )

    def digest(self) -> str:
        return digest12(dumps_compact(self.to_dict()))


@dataclass
class CandidateEvent:
    """One detector hit, traceable back to its stream, channel and params."""

    event_id: str
    stream_id: str
    channel: str
    method: str
    peak_ms: int
    window: tuple[int, int]
    score: float
    params_hash: str
    gap_flagged: bool = False

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "stream_id": self.stream_id,
            "channel": self.channel,
            "method": self.method,
            "peak_ms": self.peak_ms,
            "window": [self.window[0], self.window[1]],
            "score": self.score,
            "params_hash": self.params_hash,
            "gap_flagged": self.gap_flagged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateEvent":
        return cls(
            d["event_id"], d["stream_id"], d["channel"], d["method"], d["peak_ms"],
            (d["window"][0], d["window"][1]), d["score"], d["params_hash"],
            d.get("gap_flagged", False),
        )


@dataclass
class EventGroup:
    """Chain-merged cross-modal cluster of candidate events."""

    group_id: str
    member_ids: list[str]
    span: tuple[int, int]
    anchor_ms: int

    def to_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "member_ids": list(self.member_ids),
            "span": [self.span[0], self.span[1]],
            "anchor_ms": self.anchor_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EventGroup":
        return cls(d["group_id"], list(d["member_ids"]), (d["span"][0], d["span"][1]), d["anchor_ms"])


def _make_event(
    stream: SignalStream,
    channel: str,
    method: str,
    peak_ms: int,
    window: tuple[int, int],
    score: float,
    params_hash: str,
) -> CandidateEvent:
    eid = "ev-" + digest12(f"{stream.stream_id}|{channel}|{method}|{peak_ms}|{params_hash}")
    flagged = any(not (window[1] < a or window[0] > b) for a, b in stream.gaps)
    return CandidateEvent(
        event_id=eid,
        stream_id=stream.stream_id,
        channel=channel,
        method=method,
        peak_ms=int(peak_ms),
        window=(int(window[0]), int(window[1])),
        score=float(score),
        params_hash=params_hash,
        gap_flagged=flagged,
    )


def plateau_maxima(values: np.ndarray) -> list[int]:
    """Earliest-sample indices of interior local maxima (plateaus resolved left).

    A plateau run is a maximum iff a strictly smaller sample flanks it on
    both sides; runs touching either stream endpoint are excluded.
    """
    n = len(values)
    out: list[int] = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[j + 1] == values[i]:
            j += 1
        if i > 0 and j < n - 1 and values[i - 1] < values[i] and values[j + 1] < values[j]:
            out.append(i)
        i = j + 1
    return out


def peak_prominence(values: np.ndarray, maxima: list[int], peak: int) -> float:
    """Peak height above the higher flanking minimum.

    Each side scans from the peak to the nearest strictly higher local
    maximum (or the boundary) and takes the minimum sample on the way.
    """
    v = values[peak]
    higher = [m for m in maxima if values[m] > v]
    left_stop = max((m for m in higher if m < peak), default=0)
    right_stop = min((m for m in higher if m > peak), default=len(values) - 1)
    left_min = float(np.min(values[left_stop : peak + 1]))
    right_min = float(np.min(values[peak : right_stop + 1]))
    return float(v - max(left_min, right_min))


def _enforce_separation(
    candidates: list[tuple[int, float]], timestamps: np.ndarray, min_separation_ms: int
) -> list[int]:
    """Greedy keep-the-higher pass: retained peaks end up >= min_separation apart."""
    order = sorted(candidates, key=lambda c: (-c[1], timestamps[c[0]]))
    kept: list[int] = []
    for idx, _val in order:
        t = int(timestamps[idx])
        if all(abs(t - int(timestamps[k])) >= min_separation_ms for k in kept):
            kept.append(idx)
    return sorted(kept)


def detect_au_peaks(stream: SignalStream, params: DetectorParams) -> list[CandidateEvent]:
    """Per-channel AU intensity peaks with prominence and separation filters."""
    if stream.modality_kind != "au":
        raise InvalidInputError(f"detect_au_peaks needs an au stream, got {stream.modality_kind}")
    if stream.n_samples == 0:
        raise InvalidInputError("empty stream")
    p = params.au
    ph = params.digest()
    t0, t1 = stream.span_ms
    ts = stream.timestamps_ms
    events: list[CandidateEvent] = []
    for c, channel in enumerate(stream.channel_names):
        col = stream.values[:, c]
        maxima = plateau_maxima(col)
        candidates = [
            (i, float(col[i]))
            for i in maxima
            if col[i] >= p.min_intensity
            and peak_prominence(col, maxima, i) >= p.min_prominence
        ]
        for i in _enforce_separation(candidates, ts, p.min_separation_ms):
            peak_t = int(ts[i])
            window = (max(t0, peak_t - p.half_window_ms), min(t1, peak_t + p.half_window_ms))
            events.append(_make_event(stream, channel, AU_PEAK, peak_t, window, float(col[i]), ph))
    events.sort(key=lambda e: (e.peak_ms, e.channel))
    return events


def motion_energy(stream: SignalStream, frame_window_ms: int = 200) -> SignalStream:
    """Scalar skeletal activity: sum over joints of squared joint speed.

    Per inter-sample step, each joint contributes (|dposition| / dt)^2; the
    instantaneous series is timestamped at step midpoints and smoothed with
    a centered sliding mean of width frame_window_ms.
    """
    if stream.modality_kind != "skeleton":
        raise InvalidInputError(f"motion_energy needs a skeleton stream, got {stream.modality_kind}")
    if stream.n_samples < 2:
        raise InvalidInputError("motion_energy needs >= 2 samples")
    if frame_window_ms <= 0:
        raise InvalidInputError("frame_window_ms must be > 0")
    n_joints = len(stream.channel_names) // 3
    pos = stream.values.reshape(stream.n_samples, n_joints, 3)
    ts = stream.timestamps_ms
    mids = [int((int(ts[i]) + int(ts[i + 1])) // 2) for i in range(stream.n_samples - 1)]
    inst = np.empty(len(mids), dtype=np.float64)
    for i in range(len(mids)):
        dt_s = (int(ts[i + 1]) - int(ts[i])) / 1000.0
        dv = np.linalg.norm(pos[i + 1] - pos[i], axis=1) / dt_s
        inst[i] = float(np.sum(dv * dv))
    mids_arr = np.array(mids, dtype=np.int64)
    left, right = _window_bounds(mids_arr, frame_window_ms)
    smoothed = np.empty_like(inst)
    for k in range(len(mids)):
        smoothed[k] = float(np.mean(inst[left[k] : right[k]]))
    return SignalStream(
        stream_id=f"{stream.stream_id}.energy",
        modality_kind="skeleton",
        channel_names=["energy"],
        timestamps_ms=mids_arr,
        values=smoothed.reshape(-1, 1),
        rate_hz=stream.rate_hz,
        gaps=list(stream.gaps),
    )


def detect_motion_events(
    energy: SignalStream,
    params: DetectorParams,
    source_stream_id: Optional[str] = None,
) -> list[CandidateEvent]:
    """Threshold runs of the energy series at mean + k * std.

    A zero-variance series yields no events when threshold_k > 0 (there is
    nothing above baseline to report).
    """
    if len(energy.channel_names) != 1:
        raise InvalidInputError("detect_motion_events needs a single-channel energy stream")
    if energy.n_samples == 0:
        raise InvalidInputError("empty stream")
    p = params.motion
    ph = params.digest()
    col = energy.values[:, 0]
    ts = energy.timestamps_ms
    mean = float(np.mean(col))
    std = float(np.std(col))
    if std == 0.0 and p.threshold_k > 0:
        return []
    tau = mean + p.threshold_k * std

    events: list[CandidateEvent] = []
    sid = source_stream_id or energy.stream_id
    emit_stream = energy if source_stream_id is None else SignalStream(
        stream_id=sid, modality_kind=energy.modality_kind,
        channel_names=list(energy.channel_names), timestamps_ms=energy.timestamps_ms,
        values=energy.values, rate_hz=energy.rate_hz, gaps=list(energy.gaps),
    )
    i = 0
    n = energy.n_samples
    while i < n:
        if col[i] >= tau:
            j = i
            while j + 1 < n and col[j + 1] >= tau:
                j += 1
            start_t, end_t = int(ts[i]), int(ts[j])
            if end_t - start_t >= p.min_duration_ms:
                rel = int(np.argmax(col[i : j + 1]))  # argmax keeps the earliest tie
                peak_idx = i + rel
                events.append(
                    _make_event(
                        emit_stream, "energy", MOTION_ENERGY,
                        int(ts[peak_idx]), (start_t, end_t), float(col[peak_idx]), ph,
                    )
                )
            i = j + 1
        else:
            i += 1
    return events


def _ls_slope(t_ms: np.ndarray, y: np.ndarray) -> float:
    """Ordinary least-squares slope in units per second."""
    x = t_ms.astype(np.float64) / 1000.0
    xm = float(np.mean(x))
    ym = float(np.mean(y))
    denom = float(np.sum((x - xm) ** 2))
    if denom == 0.0:
        return 0.0
    return float(np.sum((x - xm) * (y - ym)) / denom)


def _window_bounds(ts: np.ndarray, width_ms: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample [left, right) slice bounds of the centered window 2*|dt| <= width.

    Integer arithmetic on doubled timestamps keeps half-width windows exact.
    """
    doubled = 2 * ts.astype(np.int64)
    left = np.searchsorted(doubled, doubled - width_ms, side="left")
    right = np.searchsorted(doubled, doubled + width_ms, side="right")
    return left, right


def centered_mean(ts: np.ndarray, col: np.ndarray, half_width_x2_ms: int) -> np.ndarray:
    """Centered moving average: include samples with 2*|dt| <= width."""
    left, right = _window_bounds(np.asarray(ts), half_width_x2_ms)
    out = np.empty(len(col), dtype=np.float64)
    for i in range(len(col)):
        out[i] = float(np.mean(col[left[i] : right[i]]))
    return out


def detect_physio_events(
    stream: SignalStream,
    params: DetectorParams,
    channel: Optional[str] = None,
) -> list[CandidateEvent]:
    """Physiological peak windows (rolling z-score) and trend-change windows.

    Peaks: smooth with a centered mean over smooth_ms, z-score against a
    rolling window of 10x smooth_ms, and report maximal runs with
    z >= z_threshold (peak at the run's z argmax, score = max z).

    Trend changes: at each sample, fit least-squares slopes over the
    trailing and leading slope_window_ms; local maxima of the absolute
    slope difference exceeding slope_delta become events whose window spans
    both regression windows.
    """
    if stream.modality_kind not in ("bvp", "hr", "eda", "imu"):
        raise InvalidInputError(f"detect_physio_events got modality {stream.modality_kind}")
    if channel is None:
        if len(stream.channel_names) != 1:
            raise InvalidInputError("multi-channel stream: select one channel per call")
        channel = stream.channel_names[0]
    col = stream.channel_values(channel)
    ts = stream.timestamps_ms
    n = stream.n_samples
    p = params.physio
    ph = params.digest()
    if n == 0 or int(ts[-1]) - int(ts[0]) < p.slope_window_ms:
        raise InvalidInputError("insufficient data for physio detection")
    t0, t1 = stream.span_ms

    events: list[CandidateEvent] = []

    # (a) peaks on the rolling z-score of the smoothed series
    smooth_ms = p.smooth_for(stream.modality_kind)
    smoothed = centered_mean(ts, col, smooth_ms)
    z = np.zeros(n, dtype=np.float64)
    zleft, zright = _window_bounds(ts, 10 * smooth_ms)
    for i in range(n):
        window = smoothed[zleft[i] : zright[i]]
        mu = float(np.mean(window))
        sigma = float(np.std(window))
        z[i] = 0.0 if sigma == 0.0 else (smoothed[i] - mu) / sigma
    i = 0
    while i < n:
        if z[i] >= p.z_threshold:
            j = i
            while j + 1 < n and z[j + 1] >= p.z_threshold:
                j += 1
            rel = int(np.argmax(z[i : j + 1]))
            peak_idx = i + rel
            events.append(
                _make_event(
                    stream, channel, PHYSIO_PEAK,
                    int(ts[peak_idx]), (int(ts[i]), int(ts[j])), float(z[peak_idx]), ph,
                )
            )
            i = j + 1
        else:
            i += 1

    # (b) trend changes from leading-vs-trailing regression slopes
    d = np.full(n, np.nan, dtype=np.float64)
    trail_left = np.searchsorted(ts, ts - p.slope_window_ms, side="left")
    lead_right = np.searchsorted(ts, ts + p.slope_window_ms, side="right")
    for i in range(n):
        lo, hi = int(trail_left[i]), int(lead_right[i])
        if i + 1 - lo < 2 or hi - i < 2:
            continue
        d[i] = abs(_ls_slope(ts[i:hi], col[i:hi]) - _ls_slope(ts[lo : i + 1], col[lo : i + 1]))
    defined = np.nonzero(np.isfinite(d))[0]
    if defined.size:
        dsub = d[defined]
        for rel in plateau_maxima(dsub):
            i = int(defined[rel])
            if dsub[rel] > p.slope_delta:
                window = (max(t0, int(ts[i]) - p.slope_window_ms), min(t1, int(ts[i]) + p.slope_window_ms))
                events.append(_make_event(stream, channel, PHYSIO_TREND, int(ts[i]), window, float(dsub[rel]), ph))

    events.sort(key=lambda e: (e.peak_ms, e.method))
    return events


def aggregate_events(candidates: list[CandidateEvent], merge_gap_ms: int) -> list[EventGroup]:
    """Chain-merge candidates whose windows overlap or sit within merge_gap_ms.

    Deterministic: candidates are processed in (window, peak, id) order and
    group ids derive from the sorted member ids. The result is a partition
    whose group spans are pairwise separated by more than merge_gap_ms.
    """
    if merge_gap_ms < 0:
        raise InvalidInputError("merge_gap_ms must be >= 0")
    ordered = sorted(candidates, key=lambda e: (e.window[0], e.window[1], e.peak_ms, e.event_id))
    groups: list[list[CandidateEvent]] = []
    span_end: Optional[int] = None
    for ev in ordered:
        if span_end is not None and ev.window[0] - span_end <= merge_gap_ms:
            groups[-1].append(ev)
            span_end = max(span_end, ev.window[1])
        else:
            groups.append([ev])
            span_end = ev.window[1]
    out: list[EventGroup] = []
    for members in groups:
        ids = sorted(m.event_id for m in members)
        span = (min(m.window[0] for m in members), max(m.window[1] for m in members))
        total = sum(m.score for m in members)
        if total > 0:
            anchor = math.floor(sum(m.score * m.peak_ms for m in members) / total + 0.5)
        else:
            anchor = math.floor(sum(m.peak_ms for m in members) / len(members) + 0.5)
        out.append(
            EventGroup(
                group_id="grp-" + digest12(",".join(ids)),
                member_ids=ids,
                span=span,
                anchor_ms=int(anchor),
            )
        )
    return out


# -- persistence --------------------------------------------------------


def save_events(
    store: SessionStore,
    session_id: str,
    candidates: list[CandidateEvent],
    groups: list[EventGroup],
    params: DetectorParams,
) -> None:
    doc = {
        "params": params.to_dict(),
        "params_hash": params.digest(),
        "candidates": [e.to_dict() for e in candidates],
        "groups": [g.to_dict() for g in groups],
    }
    store.put_blob(session_id, "events", dumps_canonical(doc))


def load_events(
    store: SessionStore, session_id: str
) -> tuple[list[CandidateEvent], list[EventGroup], DetectorParams]:
    doc = loads(store.get_blob(session_id, "events"))
    return (
        [CandidateEvent.from_dict(e) for e in doc["candidates"]],
        [EventGroup.from_dict(g) for g in doc["groups"]],
        DetectorParams.from_dict(doc["params"]),
    )
