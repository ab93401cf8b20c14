"""Fill-byte message padding to 16-byte blocks.

Append p copies of the byte value p, where p = 16 - (len mod 16), p = 16 for
block-aligned input.  Padding is applied unconditionally, so a failed unpad
is the wrong-key / corrupted-blob signal for the (unauthenticated) scheme.
"""

from __future__ import annotations

from .cipher import BLOCK_SIZE
from .errors import PaddingError, SizeError

MAX_MESSAGE_SIZE = 16 * 1024 * 1024


def pad(message: bytes, *, max_size: int = MAX_MESSAGE_SIZE) -> bytes:
    """Pad to a whole number of blocks; returns the flat block sequence."""
    if len(message) > max_size:
        raise SizeError(f"message of {len(message)} bytes exceeds limit {max_size}")
    p = BLOCK_SIZE - (len(message) % BLOCK_SIZE)
    return message + bytes([p]) * p


def unpad(blocks: bytes) -> bytes:
    """Strip and validate fill-byte padding."""
    if not blocks or len(blocks) % BLOCK_SIZE != 0:
        raise SizeError("input must be a non-empty multiple of the block size")
    p = blocks[-1]
    if p < 1 or p > BLOCK_SIZE:
        raise PaddingError(f"pad byte {p} out of range")
    if blocks[-p:] != bytes([p]) * p:
        raise PaddingError("inconsistent pad suffix")
    return blocks[:-p]
