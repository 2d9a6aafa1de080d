from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emoannot.errors import InvalidInputError, ParseError
from emoannot.ingest import (
    parse_au_csv,
    parse_imu,
    parse_physio_csv,
    parse_skeleton,
    resample,
)
from emoannot.store import SignalStream

EPOCH = 1_700_000_000_000


# -- AU CSV ----------------------------------------------------------------

AU_CSV = (
    "frame, timestamp, confidence, AU01_r, AU12_r, AU12_c\n"
    "1, 0.000, 0.98, 0.1, 0.0, 0\n"
    "2, 0.100, 0.98, 0.2, 1.5, 1\n"
    "3, 0.200, 0.98, 0.3, 0.2, 0\n"
)


def test_parse_au_basic():
    stream, report = parse_au_csv(AU_CSV.encode(), EPOCH)
    assert stream.channel_names == ["AU01_r", "AU12_r"]  # _c column ignored, file order kept
    assert stream.n_samples == 3
    assert list(stream.timestamps_ms) == [0, 100, 200]
    assert report.rows_read == 3 and report.rows_dropped == 0


def test_parse_au_no_au_columns():
    with pytest.raises(ParseError, match="no AU columns"):
        parse_au_csv(b"frame, timestamp\n1, 0.0\n", EPOCH)


def test_parse_au_missing_timestamp():
    with pytest.raises(ParseError, match="timestamp"):
        parse_au_csv(b"frame, AU01_r\n1, 0.5\n", EPOCH)


def test_parse_au_nan_row_becomes_gap():
    csv = (
        "frame, timestamp, AU01_r\n"
        "1, 0.0, 0.1\n"
        "2, 0.1, nan\n"
        "3, 0.2, 0.3\n"
    )
    stream, report = parse_au_csv(csv.encode(), EPOCH)
    assert stream.n_samples == 2
    assert report.rows_dropped == 1
    assert report.gaps == [(100, 100)]
    assert stream.gaps == [(100, 100)]


def test_parse_au_non_monotonic():
    csv = "frame, timestamp, AU01_r\n1, 0.2, 0.1\n2, 0.1, 0.2\n"
    with pytest.raises(ParseError, match="non-monotonic"):
        parse_au_csv(csv.encode(), EPOCH)


# -- physio ------------------------------------------------------------------

def test_parse_physio_wearable_header():
    body = "\n".join([f"{EPOCH / 1000.0:.3f}", "4.0"] + [f"{i}.0" for i in range(8)])
    stream, report = parse_physio_csv(body.encode(), "eda", EPOCH)
    # arithmetic oracle: t_i = i * 250 ms at 4 Hz
    assert list(stream.timestamps_ms) == [i * 250 for i in range(8)]
    assert stream.rate_hz == 4.0
    assert report.rows_read == 8


def test_parse_physio_two_column():
    body = "t_ms,value\n0,1.0\n250,2.0\n500,3.0\n"
    stream, _ = parse_physio_csv(body.encode(), "hr", EPOCH)
    assert list(stream.timestamps_ms) == [0, 250, 500]
    assert stream.channel_names == ["hr"]


def test_parse_physio_empty_body():
    with pytest.raises(ParseError, match="empty"):
        parse_physio_csv(b"", "eda", EPOCH)
    with pytest.raises(ParseError, match="empty"):
        parse_physio_csv(f"{EPOCH / 1000.0}\n4.0\n".encode(), "eda", EPOCH)


def test_parse_physio_bad_rate():
    with pytest.raises(ParseError, match="rate"):
        parse_physio_csv(f"{EPOCH / 1000.0}\n0.0\n1.0\n".encode(), "eda", EPOCH)


def test_parse_physio_non_monotonic():
    with pytest.raises(ParseError, match="non-monotonic"):
        parse_physio_csv(b"t_ms,value\n500,1.0\n250,2.0\n", "bvp", EPOCH)


# -- skeleton / imu -----------------------------------------------------------

SKEL = (
    "t_ms\thead_x\thead_y\thead_z\thand_x\thand_y\thand_z\n"
    + "\n".join(f"{i * 50}\t0.0\t1.6\t0.0\t{i * 0.01}\t1.0\t0.2" for i in range(5))
    + "\n"
)


def test_parse_skeleton_basic():
    stream, report = parse_skeleton(SKEL.encode(), EPOCH)
    assert stream.n_samples == 5
    assert len(stream.channel_names) == 6
    assert stream.channel_names[:3] == ["head_x", "head_y", "head_z"]
    assert report.rows_read == 5


def test_parse_skeleton_incomplete_triple():
    bad = "t_ms\thead_x\thead_y\n0\t0.0\t0.0\n"
    with pytest.raises(ParseError, match="column count|triple"):
        parse_skeleton(bad.encode(), EPOCH)


def test_parse_skeleton_duplicate_joint():
    bad = (
        "t_ms\thead_x\thead_y\thead_z\thead_x\thead_y\thead_z\n"
        "0\t0\t0\t0\t0\t0\t0\n"
    )
    with pytest.raises(ParseError, match="duplicate"):
        parse_skeleton(bad.encode(), EPOCH)


def test_parse_imu_basic():
    body = "t_ms\tacc_x\tacc_y\tacc_z\tgyr_x\tgyr_y\tgyr_z\n" + "\n".join(
        f"{i * 20}\t0\t0\t0\t0\t0\t0" for i in range(4)
    )
    stream, _ = parse_imu(body.encode(), EPOCH)
    assert stream.n_samples == 4
    assert len(stream.channel_names) == 6
    assert np.all(stream.values == 0.0)  # all-zero rows are a valid stream


def test_parse_imu_missing_columns():
    body = "t_ms\tacc_x\tacc_y\tacc_z\n0\t0\t0\t0\n"
    with pytest.raises(ParseError, match="expected columns"):
        parse_imu(body.encode(), EPOCH)


# -- parser outputs always satisfy stream invariants ---------------------------

@settings(max_examples=60, deadline=None)
@given(data=st.binary(max_size=400))
def test_parsers_never_emit_invalid_streams(data):
    for parser in (
        lambda b: parse_au_csv(b, EPOCH),
        lambda b: parse_physio_csv(b, "eda", EPOCH),
        lambda b: parse_skeleton(b, EPOCH),
        lambda b: parse_imu(b, EPOCH),
    ):
        try:
            stream, _report = parser(data)
        except (ParseError, InvalidInputError, UnicodeDecodeError):
            continue
        stream.validate()


def test_parsing_deterministic():
    a1, r1 = parse_au_csv(AU_CSV.encode(), EPOCH)
    a2, r2 = parse_au_csv(AU_CSV.encode(), EPOCH)
    assert np.array_equal(a1.values, a2.values)
    assert r1.to_dict() == r2.to_dict()


# -- resample -------------------------------------------------------------------

def _stream(ts, vals, rate, gaps=()):
    return SignalStream(
        stream_id="s", modality_kind="eda", channel_names=["eda"],
        timestamps_ms=np.array(ts), values=np.array(vals, dtype=float).reshape(-1, 1),
        rate_hz=rate, gaps=list(gaps),
    )


def test_resample_closed_form():
    out = resample(_stream([0, 1000], [0.0, 1.0], 1.0), 4.0)
    assert list(out.timestamps_ms) == [0, 250, 500, 750, 1000]
    assert np.allclose(out.values[:, 0], [0.0, 0.25, 0.5, 0.75, 1.0])


def test_resample_identity_at_own_rate():
    ts = [i * 250 for i in range(9)]
    vals = [float(i * i) for i in range(9)]
    out = resample(_stream(ts, vals, 4.0), 4.0)
    assert list(out.timestamps_ms) == ts
    assert np.allclose(out.values[:, 0], vals, atol=1e-9)


def test_resample_constant():
    out = resample(_stream([0, 100, 200, 300], [7.0] * 4, 10.0), 25.0)
    assert np.allclose(out.values, 7.0)


def test_resample_requires_two_samples():
    with pytest.raises(InvalidInputError):
        resample(_stream([0], [1.0], 1.0), 4.0)


def test_resample_linearity():
    ts = [i * 100 for i in range(20)]
    vals = [float(np.sin(i)) for i in range(20)]
    base = resample(_stream(ts, vals, 10.0), 7.0)
    scaled = resample(_stream(ts, [3.0 * v for v in vals], 10.0), 7.0)
    assert np.allclose(scaled.values, 3.0 * base.values)


def test_resample_flags_gap_samples():
    # 10 Hz nominal, but a 1 s hole between 300 and 1300: wider than 2 periods
    ts = [0, 100, 200, 300, 1300, 1400]
    out = resample(_stream(ts, [1.0] * 6, 10.0), 10.0)
    gap_mask = np.isnan(out.values[:, 0])
    assert gap_mask.any()
    gap_times = out.timestamps_ms[gap_mask]
    assert gap_times.min() > 300 and gap_times.max() < 1300
    assert out.gaps and out.gaps[0][0] == int(gap_times.min())
    out.validate()  # NaNs are flagged, stream stays valid
