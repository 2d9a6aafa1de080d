from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import o_envelope, o_window_scan

from emoannot.errors import InvalidInputError, NotFoundError
from emoannot.store import SessionMeta, SessionStore, SignalStream, StreamEntry, VideoTrackRef
from emoannot.timeline import (
    AlignmentIndex,
    RenderView,
    StreamIndexEntry,
    build_alignment_index,
    downsample_envelope,
    load_index,
    render_signal_frames,
    save_index,
    time_to_frame,
    window_to_ref,
)


def make_stream(stream_id="s1", offset=0, rate=10.0, n=100, kind="eda"):
    ts = np.array([offset + int(round(i * 1000.0 / rate)) for i in range(n)])
    channels = ["eda"] if kind == "eda" else ["c"]
    return SignalStream(
        stream_id=stream_id, modality_kind=kind, channel_names=channels,
        timestamps_ms=ts, values=np.arange(n, dtype=float).reshape(-1, 1), rate_hz=rate,
    )


def make_meta(streams, videos=()):
    return SessionMeta(
        session_id="S1", participant_id="P1", scene_id="forest",
        recording_epoch_ms=0,
        stream_manifest=[StreamEntry(s.stream_id, s.modality_kind, s.rate_hz, "") for s in streams],
        video_manifest=list(videos),
    )


# -- build ---------------------------------------------------------------

def test_build_min_rule_with_video_offset():
    s = make_stream(offset=0, n=10)
    video = VideoTrackRef("v1", "u", 30.0, 300, 500, "face_avatar")
    index = build_alignment_index(make_meta([s], [video]), [s])
    assert index.t0_ms == 0


def test_build_min_max_over_two_streams():
    a = make_stream("a", offset=0, rate=10.0, n=101)      # [0, 10000]
    b = make_stream("b", offset=2000, rate=10.0, n=101)   # [2000, 12000]
    index = build_alignment_index(make_meta([a, b]), [a, b])
    assert (index.t0_ms, index.t1_ms) == (0, 12000)


def test_build_missing_stream_errors():
    a = make_stream("a")
    b = make_stream("b")
    with pytest.raises(InvalidInputError, match="mismatch"):
        build_alignment_index(make_meta([a, b]), [a])


def test_index_round_trip(tmp_path):
    s = make_stream()
    video = VideoTrackRef("v1", "u", 30.0, 300, 500, "first_person")
    index = build_alignment_index(make_meta([s], [video]), [s])
    store = SessionStore(tmp_path)
    store.put_session(make_meta([s], [video]))
    save_index(store, index)
    back = load_index(store, "S1")
    assert back.to_dict() == index.to_dict()


# -- window_to_ref ---------------------------------------------------------

def _index_one(offset=0, rate=10.0, n=100):
    s = make_stream(offset=offset, rate=rate, n=n)
    return build_alignment_index(make_meta([s]), [s])


def test_window_arithmetic_example():
    ref = window_to_ref(_index_one(), "s1", 1000, 2000)
    assert (ref.start_idx, ref.end_idx) == (10, 21)  # floor/ceil oracle on the 10 Hz grid


def test_window_single_sample_boundary():
    ref = window_to_ref(_index_one(), "s1", 0, 0)
    assert (ref.start_idx, ref.end_idx) == (0, 1)


def test_window_before_start_flagged():
    ref = window_to_ref(_index_one(offset=5000), "s1", 0, 1000)
    assert ref.count == 0
    assert ref.out_of_span


def test_window_between_samples_empty_not_flagged():
    ref = window_to_ref(_index_one(rate=1.0), "s1", 150, 900)
    assert ref.count == 0
    assert not ref.out_of_span


def test_window_unknown_target():
    with pytest.raises(NotFoundError):
        window_to_ref(_index_one(), "nope", 0, 1)


def test_window_inverted():
    with pytest.raises(InvalidInputError):
        window_to_ref(_index_one(), "s1", 10, 5)


@settings(max_examples=200, deadline=None)
@given(
    rate=st.sampled_from([1.0, 2.0, 4.0, 5.0, 8.0, 10.0, 20.0, 25.0, 40.0, 50.0]),
    offset=st.integers(-2000, 2000),
    n=st.integers(1, 300),
    data=st.data(),
)
def test_window_matches_grid_scan_oracle(rate, offset, n, data):
    index = AlignmentIndex(
        session_id="S", t0_ms=offset, t1_ms=offset + 1_000_000,
        streams=[StreamIndexEntry("s", "eda", offset, rate, n)],
        videos=[],
    )
    start = data.draw(st.integers(offset - 3000, offset + int(n * 1000 / rate) + 3000))
    end = data.draw(st.integers(start, start + 5000))
    ref = window_to_ref(index, "s", start, end)
    scan = o_window_scan(offset, rate, n, start, end)
    if scan is None:
        assert ref.count == 0
    else:
        assert (ref.start_idx, ref.end_idx) == scan


# -- time_to_frame -----------------------------------------------------------

def _video_index(fps=30.0, offset=0, frames=300):
    video = VideoTrackRef("v1", "u", fps, frames, offset, "face_avatar")
    s = make_stream()
    return build_alignment_index(make_meta([s], [video]), [s])


def test_time_to_frame_formula():
    assert time_to_frame(_video_index(), "v1", 1000) == 30


def test_time_to_frame_clamps():
    index = _video_index(offset=500)
    assert time_to_frame(index, "v1", 0) == 0
    assert time_to_frame(index, "v1", 10_000_000) == 299


def test_time_to_frame_unknown_video():
    with pytest.raises(NotFoundError):
        time_to_frame(_video_index(), "v9", 0)


@settings(max_examples=100, deadline=None)
@given(
    fps=st.sampled_from([10.0, 24.0, 25.0, 30.0, 60.0]),
    offset=st.integers(-1000, 1000),
    t1=st.integers(-5000, 50_000),
    dt=st.integers(0, 5000),
)
def test_time_to_frame_monotone(fps, offset, t1, dt):
    index = _video_index(fps=fps, offset=offset)
    assert time_to_frame(index, "v1", t1) <= time_to_frame(index, "v1", t1 + dt)


# -- envelope ---------------------------------------------------------------

def test_envelope_full_span_single_bucket():
    s = make_stream(n=10, rate=10.0)  # span 900
    out = downsample_envelope(s, "eda", 900)
    assert out == [(0, 0.0, 9.0)]


def test_envelope_counting():
    s = make_stream(n=10, rate=10.0)
    out = downsample_envelope(s, "eda", 200)  # two periods per bucket
    assert len(out) == 5
    assert out[0] == (0, 0.0, 1.0)
    assert out[-1] == (800, 8.0, 9.0)


def test_envelope_empty_stream():
    s = SignalStream(
        stream_id="s", modality_kind="eda", channel_names=["eda"],
        timestamps_ms=np.array([], dtype=np.int64), values=np.zeros((0, 1)), rate_hz=4.0,
    )
    assert downsample_envelope(s, "eda", 100) == []


def test_envelope_unknown_channel():
    with pytest.raises(NotFoundError):
        downsample_envelope(make_stream(), "bogus", 100)


@settings(max_examples=100, deadline=None)
@given(
    n=st.integers(1, 80),
    bucket=st.integers(1, 2000),
    rate=st.sampled_from([4.0, 10.0, 25.0]),
    seed=st.integers(0, 2**30),
)
def test_envelope_matches_bruteforce(n, bucket, rate, seed):
    rng = random.Random(seed)
    ts = [int(round(i * 1000 / rate)) for i in range(n)]
    vals = [rng.uniform(-5, 5) for _ in range(n)]
    s = SignalStream(
        stream_id="s", modality_kind="eda", channel_names=["eda"],
        timestamps_ms=np.array(ts), values=np.array(vals).reshape(-1, 1), rate_hz=rate,
    )
    got = downsample_envelope(s, "eda", bucket)
    assert got == o_envelope(ts, vals, bucket)


# -- rendering ----------------------------------------------------------------

def test_render_constant_signal_identical_frames():
    s = SignalStream(
        stream_id="s", modality_kind="eda", channel_names=["eda"],
        timestamps_ms=np.array([i * 100 for i in range(50)]),
        values=np.full((50, 1), 3.3), rate_hz=10.0,
    )
    frames = render_signal_frames(s, RenderView(start_ms=1000, end_ms=2000, width_px=64,
                                                height_px=32, fps=10.0, window_ms=1000))
    assert len(frames) == 11
    assert all(f == frames[0] for f in frames)
    assert frames[0].startswith(b"P6\n64 32\n255\n")


def test_render_ramp_shifts_one_column():
    # geometry chosen so one frame step == exactly one pixel column
    n = 400
    s = SignalStream(
        stream_id="s", modality_kind="eda", channel_names=["eda"],
        timestamps_ms=np.array([i * 100 for i in range(n)]),
        values=np.linspace(0.0, 1.0, n).reshape(-1, 1), rate_hz=10.0,
    )
    view = RenderView(start_ms=2000, end_ms=4000, width_px=101, height_px=80,
                      fps=100.0, window_ms=1000)
    frames = render_signal_frames(s, view)

    def pixels(frame: bytes) -> np.ndarray:
        head_end = frame.index(b"255\n") + 4
        return np.frombuffer(frame[head_end:], dtype=np.uint8).reshape(80, 101, 3)

    a, b = pixels(frames[10]), pixels(frames[11])
    # interior columns shift left by one; skip the seam region and cursor column
    assert np.array_equal(b[:, 12:99], a[:, 13:100])
    assert not np.array_equal(a, b)


def test_render_rejects_bad_views():
    s = make_stream()
    with pytest.raises(InvalidInputError):
        render_signal_frames(s, RenderView(start_ms=0, end_ms=0))
    with pytest.raises(InvalidInputError):
        render_signal_frames(s, RenderView(start_ms=0, end_ms=100, width_px=0))
