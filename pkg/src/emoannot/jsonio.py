"""Canonical JSON encoding.

All on-disk artifacts are serialized through these helpers so that identical
inputs always produce identical bytes (sorted keys, fixed separators).
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


def dumps_canonical(obj: Any) -> bytes:
    """Pretty, deterministic JSON for inspectable on-disk artifacts."""
    return (json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def dumps_compact(obj: Any) -> bytes:
    """Single-line deterministic JSON (JSONL records)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def loads(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return json.loads(data)


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def digest12(data: bytes | str) -> str:
    """Short content digest used for derived identifiers."""
    return sha256_hex(data)[:12]
