"""Deterministic seed derivation.

A single master seed is fanned out to independent sub-streams by hashing
``(seed, role, index)``. The derivation is platform independent, so any
run is reproducible from the master seed alone regardless of worker
count or execution order.
"""

import hashlib

RNG_FAMILY = "pcg64"


def derive_seed(seed: int, role: str, index: int = 0) -> int:
    """Derive a 64-bit sub-seed for the stream named by (role, index)."""
    payload = f"{seed}:{role}:{index}".encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")
