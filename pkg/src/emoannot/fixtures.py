"""Deterministic synthetic fixture session with planted events.

The real corpus is private VR recordings; everything in the repo (tests,
demos, acceptance suite) runs against this generated session instead. Each
planted event is placed far enough from the others that the default
detector parameters find exactly the counts in EXPECTED.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

RECORDING_EPOCH_MS = 1_700_000_000_000
SESSION_ID = "S01-P01-forest"
PARTICIPANT_ID = "P01"
SCENE_ID = "forest"

# planted ground truth (verified against the detector oracles in the tests)
EXPECTED = {
    "au_peaks": 1,
    "au_peak_ms": 12000,
    "motion_events": 1,
    "physio_peaks": 1,
    "physio_trends": 0,
    "groups": 3,
    "export_records": 2,  # pipeline verifies two packets and discards one
}


def _au_csv() -> str:
    """10 Hz OpenFace-style CSV; AU12 triangle peak 3.0 at t=12 s."""
    lines = ["frame, timestamp, confidence, AU06_r, AU12_r, AU12_c"]
    for i in range(600):
        t_s = i / 10.0
        t_ms = i * 100
        au12 = max(0.0, 3.0 * (1.0 - abs(t_ms - 12000) / 1500.0))
        au06 = 0.2
        lines.append(f"{i + 1}, {t_s:.3f}, 0.98, {au06:.3f}, {au12:.3f}, {1.0 if au12 > 1 else 0.0}")
    return "\n".join(lines) + "\n"


def _eda_csv() -> str:
    """Wearable-export EDA at 4 Hz; sharp conductance burst centered at t=45 s.

    The burst must stay narrow relative to the detector's rolling z-score
    window (10x smoothing width), or it masks itself out of significance.
    """
    lines = [f"{RECORDING_EPOCH_MS / 1000.0:.3f}", "4.0"]
    for i in range(240):
        t_ms = i * 250
        bump = 1.2 * math.exp(-0.5 * ((t_ms - 45000) / 200.0) ** 2)
        lines.append(f"{0.5 + bump:.6f}")
    return "\n".join(lines) + "\n"


def _hr_csv() -> str:
    """1 Hz heart rate with a mild ripple so variance is never zero."""
    lines = ["t_ms,value"]
    for i in range(60):
        value = 70.0 + 0.1 * math.sin(2 * math.pi * i / 7.0)
        lines.append(f"{i * 1000},{value:.6f}")
    return "\n".join(lines) + "\n"


def _skeleton_tsv() -> str:
    """20 Hz, 3 joints; the right hand sweeps at 1 m/s during t=[30 s, 32 s]."""
    joints = ["head", "hand_l", "hand_r"]
    header = ["t_ms"] + [f"{j}_{axis}" for j in joints for axis in ("x", "y", "z")]
    lines = ["\t".join(header)]
    hand_x = 0.3
    for i in range(1200):
        t_ms = i * 50
        if 30000 <= t_ms < 32000:
            hand_x += 0.05  # 0.05 m per 50 ms frame = 1 m/s
        row = [str(t_ms)]
        row += ["0.0", "1.6", "0.0"]          # head
        row += ["-0.3", "1.0", "0.2"]         # hand_l
        row += [f"{hand_x:.6f}", "1.0", "0.2"]  # hand_r
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def _imu_tsv() -> str:
    """50 Hz IMU, constant gravity vector, no events."""
    header = ["t_ms", "acc_x", "acc_y", "acc_z", "gyr_x", "gyr_y", "gyr_z"]
    lines = ["\t".join(header)]
    for i in range(3000):
        lines.append("\t".join([str(i * 20), "0.0", "0.0", "9.81", "0.0", "0.0", "0.0"]))
    return "\n".join(lines) + "\n"


def write_fixture_session(root: str | Path) -> Path:
    """Write raw source files and the ingest manifest; returns the manifest path."""
    root = Path(root)
    raw = root / "raw"
    raw.mkdir(parents=True, exist_ok=True)
    (raw / "au.csv").write_text(_au_csv(), encoding="utf-8")
    (raw / "eda.csv").write_text(_eda_csv(), encoding="utf-8")
    (raw / "hr.csv").write_text(_hr_csv(), encoding="utf-8")
    (raw / "skeleton.tsv").write_text(_skeleton_tsv(), encoding="utf-8")
    (raw / "imu.tsv").write_text(_imu_tsv(), encoding="utf-8")

    manifest = {
        "session_id": SESSION_ID,
        "participant_id": PARTICIPANT_ID,
        "scene_id": SCENE_ID,
        "recording_epoch_ms": RECORDING_EPOCH_MS,
        "streams": [
            {"stream_id": "au", "kind": "au", "rate_hz": 10.0, "path": "raw/au.csv"},
            {"stream_id": "eda", "kind": "eda", "rate_hz": 4.0, "path": "raw/eda.csv"},
            {"stream_id": "hr", "kind": "hr", "rate_hz": 1.0, "path": "raw/hr.csv"},
            {"stream_id": "skeleton", "kind": "skeleton", "rate_hz": 20.0, "path": "raw/skeleton.tsv"},
            {"stream_id": "imu", "kind": "imu", "rate_hz": 50.0, "path": "raw/imu.tsv"},
        ],
        "videos": [
            {
                "video_id": "face-cam", "uri": "media/face_avatar.mp4", "fps": 30.0,
                "frame_count": 1800, "offset_ms": 0, "kind": "face_avatar",
            },
            {
                "video_id": "fpv-cam", "uri": "media/first_person.mp4", "fps": 30.0,
                "frame_count": 1800, "offset_ms": 0, "kind": "first_person",
            },
            {
                "video_id": "eda-track", "uri": "media/eda_track.mp4", "fps": 10.0,
                "frame_count": 600, "offset_ms": 0, "kind": "rendered_signal",
                "source_stream_id": "eda",
            },
        ],
    }
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest_path
