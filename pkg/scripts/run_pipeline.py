#!/usr/bin/env python3
"""Full pipeline demo on a fresh fixture session.

ingest -> detect -> pack -> annotate (echo mock) -> verify two packets,
discard one -> export. Prints the exported records at the end.

Usage: python scripts/run_pipeline.py [WORK_DIR]
"""

import sys
from pathlib import Path

from emoannot import cli, fixtures
from emoannot.annotate import load_annotations
from emoannot.export import read_export
from emoannot.packets import load_packets
from emoannot.store import SessionStore

DETECTOR_CONF = "physio.z_threshold = 2.0\nphysio.slope_delta = 2.0\n"


def main() -> int:
    work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("pipeline-demo")
    manifest = fixtures.write_fixture_session(work / "fx")
    conf = work / "detector.conf"
    conf.write_text(DETECTOR_CONF)
    root = str(work / "store")
    session = fixtures.SESSION_ID

    steps = [
        ["--store", root, "ingest", "--manifest", str(manifest)],
        ["--store", root, "detect", "--session", session, "--params", str(conf)],
        ["--store", root, "pack", "--session", session],
        ["--store", root, "annotate", "--session", session, "--provider", "mock"],
    ]
    for argv in steps:
        rc = cli.main(argv)
        if rc != 0:
            return rc

    store = SessionStore(root)
    packets = load_packets(store, session)
    annotations = load_annotations(store, session)
    for p in packets[:2]:
        cli.main(["--store", root, "act", "--session", session, "--packet", p.packet_id,
                  "--action", "verify", "--at-ms", "0"])
    for a in annotations[:2]:
        cli.main(["--store", root, "act", "--session", session, "--annotation",
                  a.annotation_id, "--action", "verify"])
    cli.main(["--store", root, "act", "--session", session, "--packet",
              packets[-1].packet_id, "--action", "discard", "--at-ms", "0"])
    cli.main(["--store", root, "export", "--session", session])

    manifest_line, records = read_export(store.export_path(session).read_bytes())
    print(f"\nexported {manifest_line['record_count']} records:")
    for r in records:
        print(f"  {r.packet_id} boundary={r.boundary} emotion={r.emotion_descriptor!r}")
        print(f"    multimodal: {r.multimodal_description[:100]}...")
    print(f"\nstore root: {root}")
    print(f"serve the UI backend with: emoannot --store {root} serve")
    return 0


if __name__ == "__main__":
    sys.exit(main())
