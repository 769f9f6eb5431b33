"""Keccak-256 and canonical encodings used for commitments and state hashes."""
from __future__ import annotations

import json
from typing import Any

from Crypto.Hash import keccak


def keccak256(data: bytes) -> bytes:
    """Original Keccak-256 (Ethereum flavour, not FIPS SHA3-256)."""
    h = keccak.new(digest_bits=256)
    h.update(bytes(data))
    return h.digest()


def canonical_json(payload: Any) -> bytes:
    return json.dumps(payload, separators=(",", ":"), sort_keys=True, default=str).encode()


def digest_hex(payload: Any) -> str:
    return "0x" + keccak256(canonical_json(payload)).hex()
