"""Hashing utilities - config provenance and architecture fingerprints."""

import hashlib
import json
from typing import Any


def sha256_hex(payload: bytes) -> str:
    """SHA-256 hex digest of raw bytes."""
    return hashlib.sha256(payload).hexdigest()


def canonical_json(data: Any) -> str:
    """Serialize to JSON with sorted keys and no whitespace, so equal data hashes equal."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def hash_document(data: Any) -> str:
    """Create a SHA-256 hash of a JSON-serializable document."""
    return sha256_hex(canonical_json(data).encode("utf-8"))


def sha256_digest(payload: bytes) -> bytes:
    """Raw 32-byte SHA-256 digest, used as file footers."""
    return hashlib.sha256(payload).digest()
