"""Block-cipher primitives.

:class:`AES128` is the production permutation: 128-bit key, 128-bit block,
checked against the published standard test vectors.  Bulk helpers push whole
multi-block buffers through one library call (raw ECB — no chaining; the
calling layers supply their own counter structure).

:class:`ToyCipher` is a deliberately tiny cipher for the attack harness:
16-bit keys, 8-bit blocks.  Its key space is larger than its block space, so
a handful of observed keystream bytes cannot identify the key — the property
the exhaustive-search checks demonstrate at desk scale.  Never use it for
data.
"""

from __future__ import annotations

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import SizeError

BLOCK_SIZE = 16
KEY_SIZE = 16


def _check_len(name: str, value: bytes, expected: int) -> None:
    if len(value) != expected:
        raise SizeError(f"{name} must be {expected} bytes, got {len(value)}")


class AES128:
    """AES with 128-bit keys; single-block and bulk raw-ECB entry points."""

    key_size = KEY_SIZE
    block_size = BLOCK_SIZE

    @staticmethod
    def encrypt_ecb(key: bytes, data: bytes) -> bytes:
        _check_len("key", key, KEY_SIZE)
        if len(data) % BLOCK_SIZE != 0:
            raise SizeError("data must be a multiple of the block size")
        enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
        return enc.update(data) + enc.finalize()

    @staticmethod
    def decrypt_ecb(key: bytes, data: bytes) -> bytes:
        _check_len("key", key, KEY_SIZE)
        if len(data) % BLOCK_SIZE != 0:
            raise SizeError("data must be a multiple of the block size")
        dec = Cipher(algorithms.AES(key), modes.ECB()).decryptor()
        return dec.update(data) + dec.finalize()

    @classmethod
    def encrypt_block(cls, key: bytes, block: bytes) -> bytes:
        _check_len("block", block, BLOCK_SIZE)
        return cls.encrypt_ecb(key, block)

    @classmethod
    def decrypt_block(cls, key: bytes, block: bytes) -> bytes:
        _check_len("block", block, BLOCK_SIZE)
        return cls.decrypt_ecb(key, block)


def _splitmix64(state: int):
    # Deterministic 64-bit generator for the toy S-box shuffle.
    mask = (1 << 64) - 1
    while True:
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        yield z ^ (z >> 31)


def _derive_sbox(seed: int) -> bytes:
    perm = list(range(256))
    gen = _splitmix64(seed)
    for i in range(255, 0, -1):
        j = next(gen) % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return bytes(perm)


class ToyCipher:
    """Seeded 16-bit-key, 8-bit-block cipher: E_(hi,lo)(x) = sbox[x ^ lo] ^ hi."""

    key_size = 2
    block_size = 1

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.sbox = _derive_sbox(seed)
        inv = [0] * 256
        for x, y in enumerate(self.sbox):
            inv[y] = x
        self.inv_sbox = bytes(inv)

    def encrypt_block(self, key: bytes, block: bytes) -> bytes:
        _check_len("key", key, 2)
        _check_len("block", block, 1)
        hi, lo = key
        return bytes([self.sbox[block[0] ^ lo] ^ hi])

    def decrypt_block(self, key: bytes, block: bytes) -> bytes:
        _check_len("key", key, 2)
        _check_len("block", block, 1)
        hi, lo = key
        return bytes([self.inv_sbox[block[0] ^ hi] ^ lo])
