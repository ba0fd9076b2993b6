"""Deterministic seed derivation for replicates, restarts, and bootstrap draws.

All randomness in the package flows through numpy's PCG64 generator, seeded
with 63-bit integers derived here. Derivation hashes the base seed together
with a tag tuple (e.g. ("boot", 17)) through SHA-256, so streams for
different replicates are independent and a single replicate can be re-run
in isolation from its recorded seed.
"""

from __future__ import annotations

import hashlib

_MASK = (1 << 63) - 1


def derive_seed(base: int, *parts: int | str) -> int:
    """Derive a child seed from ``base`` and a tuple of tags.

    Stable across processes and platforms (unlike builtin ``hash``).
    """
    key = repr((int(base),) + parts).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "little") & _MASK
