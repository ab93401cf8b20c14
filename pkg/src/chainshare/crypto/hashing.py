"""Content hashing: SHA-256 throughout, 32-byte digests."""

import hashlib

DIGEST_SIZE = 32


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()
