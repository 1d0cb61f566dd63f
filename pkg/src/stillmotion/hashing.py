"""64-bit content checksums for frames and manifest integrity.

BLAKE2b truncated to 8 bytes, read little-endian.  Used for integrity
checking only, never for security.
"""

from __future__ import annotations

import hashlib

import numpy as np


def hash64(data: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def frames_checksum(frames: np.ndarray) -> int:
    """Checksum of raw frame bytes in row-major, frame-major order."""
    return hash64(np.ascontiguousarray(frames).tobytes())
