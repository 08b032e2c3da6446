"""Portable seed derivation for reproducible per-document randomness."""

from __future__ import annotations

import hashlib

MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *labels: str) -> int:
    """Split a parent seed into an independent 64-bit stream keyed by labels.

    The derivation is a SHA-256 hash over the parent seed and the label
    sequence, so it is stable across machines, Python versions, and worker
    counts. Labels are separated by NUL bytes to avoid concatenation
    ambiguity.
    """
    h = hashlib.sha256()
    h.update(str(seed & MASK64).encode("ascii"))
    for label in labels:
        h.update(b"\x00")
        h.update(label.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")
