"""All-or-nothing transform (package transform).

An unkeyed, invertible mapping from s data blocks to an s+1 block
pseudomessage.  Each data block is masked with a counter keystream under a
random inner key; the final block hides that inner key behind the XOR of
block digests h_i = E_K0(m'_i XOR ctr_i), K0 a fixed public constant.  Every
pseudoblock is needed to recover the inner key, so withholding or flipping
any part of the output scrambles the whole input.

Block sequences are flat byte strings, length a multiple of 16; counters are
1-based 16-byte big-endian.
"""

from __future__ import annotations

from .. import _kernels
from .cipher import AES128, BLOCK_SIZE
from .errors import SizeError

PUBLIC_DIGEST_KEY = bytes(BLOCK_SIZE)


def aont_forward(blocks: bytes, inner_key: bytes) -> bytes:
    """Transform s data blocks into an s+1 block pseudomessage."""
    if not blocks or len(blocks) % BLOCK_SIZE != 0:
        raise SizeError("blocks must be a non-empty multiple of 16 bytes")
    s = len(blocks) // BLOCK_SIZE
    ctrs = _kernels.counter_blocks(1, s)
    masked = _kernels.xor_bytes(blocks, AES128.encrypt_ecb(inner_key, ctrs))
    digests = AES128.encrypt_ecb(PUBLIC_DIGEST_KEY, _kernels.xor_bytes(masked, ctrs))
    key_block = _kernels.xor_bytes(inner_key, _kernels.xor_fold(digests))
    return masked + key_block


def aont_inverse(pseudo: bytes) -> bytes:
    """Invert the transform; requires the complete pseudomessage."""
    if len(pseudo) < 2 * BLOCK_SIZE or len(pseudo) % BLOCK_SIZE != 0:
        raise SizeError("pseudomessage must be at least 2 whole blocks")
    masked, key_block = pseudo[:-BLOCK_SIZE], pseudo[-BLOCK_SIZE:]
    s = len(masked) // BLOCK_SIZE
    ctrs = _kernels.counter_blocks(1, s)
    digests = AES128.encrypt_ecb(PUBLIC_DIGEST_KEY, _kernels.xor_bytes(masked, ctrs))
    inner_key = _kernels.xor_bytes(key_block, _kernels.xor_fold(digests))
    return _kernels.xor_bytes(masked, AES128.encrypt_ecb(inner_key, ctrs))
