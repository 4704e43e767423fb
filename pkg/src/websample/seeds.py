"""Deterministic seed derivation for all randomized stages."""
from __future__ import annotations

import hashlib


def derive_seed(*parts) -> int:
    """Derive a 64-bit seed from a root seed plus arbitrary labels.

    Sub-streams are keyed by (seed, stage, index, ...) so that adding a new
    stage or walker never perturbs the streams of existing ones.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
