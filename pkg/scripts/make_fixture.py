#!/usr/bin/env python3
"""Write the synthetic fixture session (raw files + ingest manifest) to a directory.

Usage: python scripts/make_fixture.py [OUT_DIR]
"""

import sys
from pathlib import Path

from emoannot import fixtures


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("fixture-session")
    manifest = fixtures.write_fixture_session(out)
    print(f"fixture session written under {out}")
    print(f"ingest manifest: {manifest}")
    print(f"planted events: {fixtures.EXPECTED}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
