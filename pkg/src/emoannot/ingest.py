"""Parsers that turn per-modality source files into SignalStream values.

Conventions shared by every parser:
  * all timestamps come out as integer milliseconds relative to the session
    recording epoch (source files are assumed to share that origin, except
    wearable physio exports which carry their own absolute start epoch);
  * rows with unparseable numerics are dropped and counted;
  * NaN cells mark gaps: the row is dropped and a gap interval is recorded,
    so the resulting value matrix is always finite.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidInputError, ParseError
from .store import SignalStream

AU_COLUMN_RE = re.compile(r"^AU\d+_r$")

# Interpolation never bridges gaps wider than this many nominal periods.
GAP_BRIDGE_PERIODS = 2


@dataclass
class ParseReport:
    """What a parser did to one source file; persisted for auditability."""

    stream_id: str
    rows_read: int = 0
    rows_dropped: int = 0
    gaps: list[tuple[int, int]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "stream_id": self.stream_id,
            "rows_read": self.rows_read,
            "rows_dropped": self.rows_dropped,
            "gaps": [[int(a), int(b)] for a, b in self.gaps],
            "warnings": list(self.warnings),
        }


def _read_text(source: str | Path | bytes) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    return Path(source).read_text(encoding="utf-8")


class _GapTracker:
    """Accumulates dropped-NaN rows into maximal contiguous gap intervals."""

    def __init__(self) -> None:
        self.intervals: list[tuple[int, int]] = []
        self._run_open = False

    def drop(self, t_ms: int) -> None:
        if self._run_open and self.intervals and t_ms >= self.intervals[-1][0]:
            start, _ = self.intervals[-1]
            self.intervals[-1] = (start, t_ms)
        else:
            self.intervals.append((t_ms, t_ms))
        self._run_open = True

    def keep(self) -> None:
        self._run_open = False


def _finalize(
    stream_id: str,
    modality_kind: str,
    channels: list[str],
    ts: list[int],
    rows: list[list[float]],
    report: ParseReport,
    rate_hz: Optional[float] = None,
) -> SignalStream:
    if len(ts) > 1:
        diffs = np.diff(np.array(ts, dtype=np.int64))
        if not np.all(diffs > 0):
            raise ParseError(f"{stream_id}: non-monotonic timestamps after cleanup")
    if rate_hz is None:
        if len(ts) > 1 and ts[-1] > ts[0]:
            rate_hz = 1000.0 * (len(ts) - 1) / (ts[-1] - ts[0])
        else:
            rate_hz = 1.0
    stream = SignalStream(
        stream_id=stream_id,
        modality_kind=modality_kind,
        channel_names=channels,
        timestamps_ms=np.array(ts, dtype=np.int64),
        values=np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(channels))),
        rate_hz=rate_hz,
        gaps=report.gaps,
    )
    stream.validate()
    return stream


def parse_au_csv(
    source: str | Path | bytes, recording_epoch_ms: int, stream_id: str = "au"
) -> tuple[SignalStream, ParseReport]:
    """Parse an OpenFace CSV, keeping only the AU intensity (`AU??_r`) columns.

    The `timestamp` column (seconds from the recording start) becomes integer
    milliseconds; `_c` presence columns and everything else are ignored.
    """
    text = _read_text(source)
    reader = csv.reader(io.StringIO(text))
    try:
        raw_header = next(reader)
    except StopIteration:
        raise ParseError(f"{stream_id}: empty file") from None
    header = [h.strip() for h in raw_header]
    if "timestamp" not in header:
        raise ParseError(f"{stream_id}: missing timestamp column")
    ts_col = header.index("timestamp")
    au_cols = [(i, name) for i, name in enumerate(header) if AU_COLUMN_RE.match(name)]
    if not au_cols:
        raise ParseError(f"{stream_id}: no AU columns")

    report = ParseReport(stream_id=stream_id)
    gaps = _GapTracker()
    ts: list[int] = []
    rows: list[list[float]] = []
    for raw in reader:
        if not raw or all(not c.strip() for c in raw):
            continue
        report.rows_read += 1
        try:
            t_ms = int(round(float(raw[ts_col]) * 1000.0))
            vals = [float(raw[i]) for i, _ in au_cols]
        except (ValueError, IndexError):
            report.rows_dropped += 1
            report.warnings.append(f"row {report.rows_read}: unparseable numerics")
            continue
        if any(math.isnan(v) or math.isinf(v) for v in vals):
            report.rows_dropped += 1
            gaps.drop(t_ms)
            continue
        gaps.keep()
        ts.append(t_ms)
        rows.append(vals)
    report.gaps = gaps.intervals
    stream = _finalize(stream_id, "au", [name for _, name in au_cols], ts, rows, report)
    return stream, report


def parse_physio_csv(
    source: str | Path | bytes,
    kind: str,
    recording_epoch_ms: int,
    stream_id: Optional[str] = None,
) -> tuple[SignalStream, ParseReport]:
    """Parse a single-channel physiological export (BVP, HR or EDA).

    Two formats are auto-detected:
      (a) wearable style: line 1 = absolute start epoch (unix seconds),
          line 2 = rate in Hz, then one value per line;
      (b) two-column `t_ms,value` rows (optional header line).
    """
    if kind not in ("bvp", "hr", "eda"):
        raise ParseError(f"physio kind must be bvp/hr/eda, got {kind!r}")
    stream_id = stream_id or kind
    text = _read_text(source)
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError(f"{stream_id}: empty body")

    report = ParseReport(stream_id=stream_id)
    gaps = _GapTracker()
    ts: list[int] = []
    rows: list[list[float]] = []

    def is_number(s: str) -> bool:
        try:
            float(s)
            return True
        except ValueError:
            return False

    header_form = (
        len(lines) >= 2
        and "," not in lines[0]
        and "," not in lines[1]
        and is_number(lines[0])
        and is_number(lines[1])
    )
    if header_form:
        epoch_s = float(lines[0])
        rate = float(lines[1])
        if rate <= 0:
            raise ParseError(f"{stream_id}: rate must be > 0, got {rate}")
        body = lines[2:]
        if not body:
            raise ParseError(f"{stream_id}: empty body")
        start_ms = int(round(epoch_s * 1000.0)) - recording_epoch_ms
        for i, ln in enumerate(body):
            report.rows_read += 1
            t_ms = start_ms + int(round(i * 1000.0 / rate))
            try:
                v = float(ln)
            except ValueError:
                report.rows_dropped += 1
                report.warnings.append(f"row {report.rows_read}: unparseable value")
                continue
            if math.isnan(v) or math.isinf(v):
                report.rows_dropped += 1
                gaps.drop(t_ms)
                continue
            gaps.keep()
            ts.append(t_ms)
            rows.append([v])
        report.gaps = gaps.intervals
        stream = _finalize(stream_id, kind, [kind], ts, rows, report, rate_hz=rate)
        return stream, report

    # two-column form
    body = lines
    if body and not is_number(body[0].split(",")[0]):
        body = body[1:]  # header line like "t_ms,value"
    if not body:
        raise ParseError(f"{stream_id}: empty body")
    for ln in body:
        parts = [p.strip() for p in ln.split(",")]
        if len(parts) != 2:
            raise ParseError(f"{stream_id}: unknown format")
        report.rows_read += 1
        try:
            t_ms = int(round(float(parts[0])))
        except ValueError:
            report.rows_dropped += 1
            report.warnings.append(f"row {report.rows_read}: unparseable t_ms")
            continue
        try:
            v = float(parts[1])
        except ValueError:
            report.rows_dropped += 1
            report.warnings.append(f"row {report.rows_read}: unparseable value")
            continue
        if math.isnan(v) or math.isinf(v):
            report.rows_dropped += 1
            gaps.drop(t_ms)
            continue
        gaps.keep()
        ts.append(t_ms)
        rows.append([v])
    if len(ts) > 1 and any(b <= a for a, b in zip(ts, ts[1:])):
        raise ParseError(f"{stream_id}: non-monotonic")
    report.gaps = gaps.intervals
    stream = _finalize(stream_id, kind, [kind], ts, rows, report)
    return stream, report


def _parse_tsv_table(
    source: str | Path | bytes, stream_id: str, report: ParseReport
) -> tuple[list[str], list[int], list[list[float]], list[tuple[int, int]]]:
    text = _read_text(source)
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError(f"{stream_id}: empty file")
    header = lines[0].split("\t")
    if header[:1] != ["t_ms"]:
        raise ParseError(f"{stream_id}: first column must be t_ms")
    channels = header[1:]
    gaps = _GapTracker()
    ts: list[int] = []
    rows: list[list[float]] = []
    for ln in lines[1:]:
        parts = ln.split("\t")
        report.rows_read += 1
        if len(parts) != len(header):
            report.rows_dropped += 1
            report.warnings.append(f"row {report.rows_read}: wrong column count")
            continue
        try:
            t_ms = int(round(float(parts[0])))
            vals = [float(p) for p in parts[1:]]
        except ValueError:
            report.rows_dropped += 1
            report.warnings.append(f"row {report.rows_read}: unparseable numerics")
            continue
        if any(math.isnan(v) or math.isinf(v) for v in vals):
            report.rows_dropped += 1
            gaps.drop(t_ms)
            continue
        gaps.keep()
        ts.append(t_ms)
        rows.append(vals)
    return channels, ts, rows, gaps.intervals


def parse_skeleton(
    source: str | Path | bytes, recording_epoch_ms: int, stream_id: str = "skeleton"
) -> tuple[SignalStream, ParseReport]:
    """Parse a body-motion TSV: `t_ms` then `<joint>_{x,y,z}` triples in meters."""
    report = ParseReport(stream_id=stream_id)
    channels, ts, rows, gap_intervals = _parse_tsv_table(source, stream_id, report)
    if len(channels) == 0 or len(channels) % 3 != 0:
        raise ParseError(f"{stream_id}: column count must be 1 + 3 * joints, got {1 + len(channels)}")
    joints: list[str] = []
    for j in range(0, len(channels), 3):
        triple = channels[j : j + 3]
        stems = {c.rsplit("_", 1)[0] for c in triple}
        suffixes = [c.rsplit("_", 1)[1] if "_" in c else "" for c in triple]
        if len(stems) != 1 or suffixes != ["x", "y", "z"]:
            raise ParseError(f"{stream_id}: incomplete joint triple around column {triple[0]!r}")
        joint = triple[0].rsplit("_", 1)[0]
        if joint in joints:
            raise ParseError(f"{stream_id}: duplicate joint {joint!r}")
        joints.append(joint)
    report.gaps = gap_intervals
    stream = _finalize(stream_id, "skeleton", channels, ts, rows, report)
    return stream, report


IMU_COLUMNS = ["acc_x", "acc_y", "acc_z", "gyr_x", "gyr_y", "gyr_z"]


def parse_imu(
    source: str | Path | bytes, recording_epoch_ms: int, stream_id: str = "imu"
) -> tuple[SignalStream, ParseReport]:
    """Parse an IMU TSV with the fixed accelerometer + gyroscope column set."""
    report = ParseReport(stream_id=stream_id)
    channels, ts, rows, gap_intervals = _parse_tsv_table(source, stream_id, report)
    if channels != IMU_COLUMNS:
        raise ParseError(f"{stream_id}: expected columns t_ms,{','.join(IMU_COLUMNS)}")
    report.gaps = gap_intervals
    stream = _finalize(stream_id, "imu", channels, ts, rows, report)
    return stream, report


def effective_gaps(stream: SignalStream) -> list[tuple[int, int]]:
    """Flagged gap intervals plus implicit ones where sampling stalls.

    A spacing wider than GAP_BRIDGE_PERIODS nominal periods counts as a gap:
    linear interpolation must not bridge it.
    """
    out = list(stream.gaps)
    if stream.n_samples >= 2:
        limit = GAP_BRIDGE_PERIODS * stream.period_ms
        ts = stream.timestamps_ms
        for i in range(len(ts) - 1):
            a, b = int(ts[i]), int(ts[i + 1])
            if b - a > limit:
                out.append((a, b))
    out.sort()
    merged: list[tuple[int, int]] = []
    for start, end in out:
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def resample(stream: SignalStream, target_rate_hz: float) -> SignalStream:
    """Linearly resample onto a uniform grid spanning the stream.

    Grid samples falling strictly inside a gap interval come out as NaN and
    are flagged in the output's gap list.
    """
    if stream.n_samples < 2:
        raise InvalidInputError(f"resample needs >= 2 samples, got {stream.n_samples}")
    if not target_rate_hz > 0:
        raise InvalidInputError("target_rate_hz must be > 0")
    t0, t1 = stream.span_ms
    step = 1000.0 / target_rate_hz
    k_max = int(math.floor((t1 - t0) * target_rate_hz / 1000.0 + 1e-9))
    grid = [t0 + int(round(k * step)) for k in range(k_max + 1)]
    while grid and grid[-1] > t1:
        grid.pop()
    grid_arr = np.array(grid, dtype=np.int64)

    gaps = effective_gaps(stream)
    in_gap = np.zeros(len(grid), dtype=bool)
    for start, end in gaps:
        in_gap |= (grid_arr > start) & (grid_arr < end)

    src_t = stream.timestamps_ms.astype(np.float64)
    out = np.empty((len(grid), len(stream.channel_names)), dtype=np.float64)
    for c in range(len(stream.channel_names)):
        out[:, c] = np.interp(grid_arr.astype(np.float64), src_t, stream.values[:, c])
    out[in_gap, :] = np.nan

    out_gaps: list[tuple[int, int]] = []
    run_start: Optional[int] = None
    for i, flagged in enumerate(in_gap):
        if flagged and run_start is None:
            run_start = int(grid_arr[i])
        if not flagged and run_start is not None:
            out_gaps.append((run_start, int(grid_arr[i - 1])))
            run_start = None
    if run_start is not None:
        out_gaps.append((run_start, int(grid_arr[-1])))

    return SignalStream(
        stream_id=stream.stream_id,
        modality_kind=stream.modality_kind,
        channel_names=list(stream.channel_names),
        timestamps_ms=grid_arr,
        values=out,
        rate_hz=target_rate_hz,
        gaps=out_gaps,
    )
