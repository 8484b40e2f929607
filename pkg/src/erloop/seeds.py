"""Deterministic derivation of independent sub-seeds from one master seed."""

from __future__ import annotations

import hashlib


def derive_seed(master: int, label: str) -> int:
    """A stable 64-bit seed for the stream named ``label``.

    Different labels give statistically independent streams; the same
    (master, label) always gives the same seed on every platform.
    """
    digest = hashlib.sha256(f"{master}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
