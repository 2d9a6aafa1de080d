from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracles / synth helpers

from emoannot import cli, fixtures
from emoannot.store import SessionStore

FIXTURE_PARAMS = "physio.z_threshold = 2.0\nphysio.slope_delta = 2.0\n"


def run_fixture_pipeline(work: Path, through: str = "annotate") -> SessionStore:
    """ingest -> detect -> pack -> annotate(mock) on the bundled fixture session."""
    manifest = fixtures.write_fixture_session(work / "fx")
    params = work / "detector.conf"
    params.write_text(FIXTURE_PARAMS)
    store_root = str(work / "store")
    stages = {
        "ingest": ["--store", store_root, "ingest", "--manifest", str(manifest)],
        "detect": ["--store", store_root, "detect", "--session", fixtures.SESSION_ID,
                   "--params", str(params)],
        "pack": ["--store", store_root, "pack", "--session", fixtures.SESSION_ID],
        "annotate": ["--store", store_root, "annotate", "--session", fixtures.SESSION_ID,
                     "--provider", "mock"],
    }
    for stage in ("ingest", "detect", "pack", "annotate"):
        rc = cli.main(stages[stage])
        assert rc == 0, f"{stage} failed"
        if stage == through:
            break
    return SessionStore(store_root)


@pytest.fixture
def fixture_store(tmp_path) -> SessionStore:
    return run_fixture_pipeline(tmp_path)


@pytest.fixture
def ingested_store(tmp_path) -> SessionStore:
    return run_fixture_pipeline(tmp_path, through="ingest")
