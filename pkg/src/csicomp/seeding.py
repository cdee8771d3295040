"""Deterministic seed derivation and random generator construction.

All randomness in the package flows through numpy's PCG64 bit generator.
Child seeds are derived by hashing the master seed together with a label
path (e.g. ``("cov", realization)``) through SHA-256 and keeping the low 64
bits, so any worker process can recompute its stream without coordination
and results do not depend on scheduling order.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

__all__ = ["derive_seed", "generator"]

_MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, *parts) -> int:
    """Derive a 64-bit child seed from a master seed and a label path.

    Parts may be ints (hashed as 8-byte little-endian words, reduced mod
    2^64) or strings (hashed as UTF-8 with a length prefix). The same path
    always yields the same child seed.
    """
    h = hashlib.sha256()
    h.update(struct.pack("<Q", int(master_seed) & _MASK64))
    for part in parts:
        if isinstance(part, (bool, float)):
            raise TypeError(f"seed path parts must be int or str, got {part!r}")
        if isinstance(part, (int, np.integer)):
            h.update(b"i")
            h.update(struct.pack("<Q", int(part) & _MASK64))
        elif isinstance(part, str):
            data = part.encode("utf-8")
            h.update(b"s")
            h.update(struct.pack("<I", len(data)))
            h.update(data)
        else:
            raise TypeError(f"seed path parts must be int or str, got {part!r}")
    return int.from_bytes(h.digest()[:8], "little")


def generator(seed: int) -> np.random.Generator:
    """PCG64 generator for the given 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))
