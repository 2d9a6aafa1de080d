from __future__ import annotations

import numpy as np
import pytest

from oracles import o_monotone_runs

from emoannot.describe import (
    describe_context,
    describe_face,
    describe_motion,
    describe_physio,
    monotone_segments,
)
from emoannot.errors import InvalidInputError
from emoannot.events import EventGroup
from emoannot.packets import EventPacket
from emoannot.store import SessionMeta, SignalStream, StreamEntry, VideoTrackRef
from emoannot.timeline import build_alignment_index


def au_stream(rows, channels=("AU06_r", "AU12_r"), rate=10.0):
    n = len(rows)
    return SignalStream(
        stream_id="au", modality_kind="au", channel_names=list(channels),
        timestamps_ms=np.array([int(round(i * 1000 / rate)) for i in range(n)]),
        values=np.array(rows, dtype=float), rate_hz=rate,
    )


def packet_for(span, anchor):
    group = EventGroup(group_id="g", member_ids=["e"], span=span, anchor_ms=anchor)
    return EventPacket(
        packet_id="p", group=group, pointers=[], keyframes=[],
        state="candidate", boundary=span,
    )


# -- face -----------------------------------------------------------------

def test_face_threshold_filter_and_name():
    rows = [[0.0, 0.0]] * 5 + [[0.0, 3.0]] + [[0.0, 0.0]] * 5
    packet = packet_for((300, 700), 500)
    descriptor = describe_face(packet, au_stream(rows))
    assert descriptor.features == [("AU12", 3.0)]
    assert "lip corner puller" in descriptor.summary


def test_face_all_below_threshold_is_neutral():
    rows = [[0.2, 0.4]] * 10
    descriptor = describe_face(packet_for((0, 900), 500), au_stream(rows))
    assert descriptor.features == []
    assert descriptor.summary == "neutral"


def test_face_orders_by_intensity():
    rows = [[2.0, 3.5]] * 10
    descriptor = describe_face(packet_for((0, 900), 500), au_stream(rows))
    assert [k for k, _ in descriptor.features] == ["AU12", "AU06"]
    assert descriptor.summary.startswith("lip corner puller")


def test_face_window_outside_stream_errors():
    rows = [[0.0, 0.0]] * 10
    with pytest.raises(InvalidInputError, match="no AU stream"):
        describe_face(packet_for((5000, 6000), 5500), au_stream(rows))


def test_face_matches_threshold_oracle():
    rows = [[1.7, 0.9], [0.4, 2.2], [1.0, 1.0]]
    stream = au_stream(rows)
    for anchor, row in zip((0, 100, 200), rows):
        descriptor = describe_face(packet_for((0, 200), anchor), stream)
        expected = sorted(
            (name[:-2], value)
            for name, value in zip(stream.channel_names, row)
            if value >= 1.0
        )
        assert sorted(descriptor.features) == expected


# -- motion ---------------------------------------------------------------

def skeleton(frames, rate=10.0, joints=("head", "hand_r")):
    n = len(frames)
    names = [f"{j}_{axis}" for j in joints for axis in ("x", "y", "z")]
    return SignalStream(
        stream_id="skel", modality_kind="skeleton", channel_names=names,
        timestamps_ms=np.array([int(round(i * 1000 / rate)) for i in range(n)]),
        values=np.array(frames, dtype=float).reshape(n, -1), rate_hz=rate,
    )


def test_motion_still():
    frames = [[0.0, 1.6, 0.0, 0.3, 1.0, 0.1]] * 10
    descriptor = describe_motion(packet_for((0, 900), 400), skeleton(frames))
    assert descriptor.summary == "still"
    assert descriptor.feature("mean_speed_mps") == 0.0


def test_motion_top_joint_is_the_moving_one():
    frames = [[0.0, 1.6, 0.0, 0.1 * i, 1.0, 0.1] for i in range(10)]
    descriptor = describe_motion(packet_for((0, 900), 400), skeleton(frames))
    top = descriptor.feature("top_joints").split(",")
    assert top[0] == "hand_r"  # path-length oracle: hand_r moves 0.9 m, head 0 m
    assert "hand_r" in descriptor.summary


def test_motion_needs_two_samples():
    frames = [[0.0] * 6] * 10
    with pytest.raises(InvalidInputError):
        describe_motion(packet_for((0, 50), 0), skeleton(frames))


def test_motion_path_length_ranking_oracle():
    frames = []
    for i in range(20):
        head = (0.01 * i, 1.6, 0.0)      # path 0.19
        hand = (0.05 * i, 1.0, 0.0)      # path 0.95
        frames.append(list(head) + list(hand))
    descriptor = describe_motion(packet_for((0, 1900), 900), skeleton(frames))
    assert descriptor.feature("top_joints") == "hand_r,head"


# -- physio ---------------------------------------------------------------

def eda(values, rate=4.0):
    n = len(values)
    return SignalStream(
        stream_id="eda", modality_kind="eda", channel_names=["eda"],
        timestamps_ms=np.array([int(round(i * 1000 / rate)) for i in range(n)]),
        values=np.array(values, dtype=float).reshape(-1, 1), rate_hz=rate,
    )


def test_physio_ramp_single_rising_segment():
    values = [0.1 * i for i in range(20)]
    descriptor = describe_physio(packet_for((0, 4750), 2000), eda(values), smooth_ms=100)
    assert descriptor.feature("n_segments") == 1
    assert "rising" in descriptor.summary
    assert o_monotone_runs(values) == ["rising"]


def test_physio_triangle_two_segments_and_peak():
    up = [0.2 * i for i in range(10)]
    values = up + up[-2::-1]
    descriptor = describe_physio(packet_for((0, 4500), 2250), eda(values), smooth_ms=100)
    assert descriptor.feature("n_segments") == 2
    assert descriptor.feature("local_max_at_ms") == 2250
    assert "rising" in descriptor.summary and "falling" in descriptor.summary
    assert "peak at" in descriptor.summary
    assert o_monotone_runs(values) == ["rising", "falling"]


def test_physio_constant_flat():
    values = [1.0] * 20
    descriptor = describe_physio(packet_for((0, 4750), 2000), eda(values), smooth_ms=100)
    assert descriptor.feature("n_segments") == 0
    assert descriptor.summary == "EDA flat"
    assert o_monotone_runs(values) == []


def test_physio_needs_three_samples():
    with pytest.raises(InvalidInputError):
        describe_physio(packet_for((0, 250), 100), eda([1.0, 2.0] * 5), smooth_ms=100)


def test_monotone_segments_merges_short_runs():
    ts = np.array([0, 250, 500, 750, 1000, 1250, 1500, 1750])
    values = np.array([0.0, 1.0, 2.0, 1.9, 3.0, 4.0, 5.0, 6.0])  # one-step dip
    segments, _ = monotone_segments(ts, values, min_run_ms=500)
    assert [s.direction for s in segments] == ["rising"]


# -- context ----------------------------------------------------------------

def session_index(with_fpv=True):
    s = SignalStream(
        stream_id="s", modality_kind="eda", channel_names=["eda"],
        timestamps_ms=np.array([i * 250 for i in range(240)]),
        values=np.zeros((240, 1)), rate_hz=4.0,
    )
    videos = [VideoTrackRef("face", "media/face.mp4", 30.0, 1800, 0, "face_avatar")]
    if with_fpv:
        videos.append(VideoTrackRef("fpv", "media/fpv.mp4", 30.0, 1800, 0, "first_person"))
    meta = SessionMeta(
        session_id="S", participant_id="P", scene_id="forest", recording_epoch_ms=0,
        stream_manifest=[StreamEntry("s", "eda", 4.0, "")], video_manifest=videos,
    )
    return build_alignment_index(meta, [s])


def test_context_three_keyframes():
    descriptor = describe_context(packet_for((10_000, 14_000), 12_000), session_index())
    assert descriptor.feature("video_id") == "fpv"
    assert descriptor.feature("frame_start") == 300
    assert descriptor.feature("frame_anchor") == 360
    assert descriptor.feature("frame_end") == 420
    assert descriptor.feature("clamped") is False


def test_context_absent_without_first_person():
    assert describe_context(packet_for((0, 100), 50), session_index(with_fpv=False)) is None


def test_context_clamps_and_flags():
    descriptor = describe_context(packet_for((-5000, -1000), -2000), session_index())
    assert descriptor.feature("frame_start") == 0
    assert descriptor.feature("clamped") is True
