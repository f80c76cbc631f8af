"""Stable cross-run seed derivation (hash-based, platform independent)."""

from __future__ import annotations

import hashlib


def stable_seed(*parts) -> int:
    """Fold arbitrary ints/strings into a 63-bit seed, reproducibly."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
