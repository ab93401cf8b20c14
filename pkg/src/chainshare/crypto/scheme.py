"""Symmetric proxy re-encryption over the all-or-nothing transform.

Encryption: pad the message, run the package transform under a fresh inner
key, then counter-mode encrypt only a designated subset D of pseudoblocks
under the file key.  Because recovering anything requires every pseudoblock,
hiding D (by default just the masked-key block) hides the whole message.

Re-encryption to a new key never touches the plaintext: the owner derives one
XOR pad per designated block — old keystream XOR new keystream — and a proxy
applies the pads blindly.  The resulting blob decrypts under the new key and
the pads are one block each, independent of the file size.

Serialized blob format (bit-exact):

    magic "MKC1" | version u8 = 1 | nonce (16) | block_count u32 BE |
    dset size u16 BE | dset indices u32 BE each, ascending | blocks (16 each)

Re-encryption key format:

    new_nonce (16) | pad count u16 BE | (index u32 BE | pad (16)) each, ascending
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .. import _kernels
from .aont import aont_forward, aont_inverse
from .cipher import AES128, BLOCK_SIZE
from .errors import SizeError
from .padding import MAX_MESSAGE_SIZE, pad, unpad
from .rng import RandomSource, coerce_rng

MAGIC = b"MKC1"
VERSION = 1

DesignationPolicy = Callable[[int], "tuple[int, ...]"]


def _normalize_dset(indices: Iterable[int], block_count: int) -> tuple[int, ...]:
    dset = tuple(sorted(set(int(i) for i in indices)))
    if not dset:
        raise ValueError("designated block set must be non-empty")
    if dset[0] < 1 or dset[-1] > block_count:
        raise ValueError(f"designated indices must lie in [1, {block_count}]")
    return dset


def designate_last(block_count: int) -> tuple[int, ...]:
    return (block_count,)


def designate_first_last(block_count: int) -> tuple[int, ...]:
    return tuple(sorted({1, block_count}))


def designate_all(block_count: int) -> tuple[int, ...]:
    return tuple(range(1, block_count + 1))


POLICIES: dict[str, DesignationPolicy] = {
    "last": designate_last,
    "first-last": designate_first_last,
    "all": designate_all,
}


def resolve_policy(policy: str | DesignationPolicy) -> DesignationPolicy:
    if callable(policy):
        return policy
    try:
        return POLICIES[policy]
    except KeyError:
        raise ValueError(f"unknown designation policy {policy!r}") from None


@dataclass(frozen=True)
class FileCiphertext:
    """On-node ciphertext: header plus the partially-encrypted pseudomessage."""

    version: int
    nonce: bytes
    block_count: int
    dset: tuple[int, ...]
    blocks: bytes

    def __post_init__(self):
        if len(self.nonce) != BLOCK_SIZE:
            raise SizeError("nonce must be 16 bytes")
        if len(self.blocks) != self.block_count * BLOCK_SIZE:
            raise SizeError("blocks length does not match block_count")
        object.__setattr__(self, "dset", _normalize_dset(self.dset, self.block_count))

    def block(self, index: int) -> bytes:
        """1-based block access."""
        if index < 1 or index > self.block_count:
            raise IndexError(f"block index {index} out of range")
        return self.blocks[(index - 1) * BLOCK_SIZE : index * BLOCK_SIZE]

    def to_bytes(self) -> bytes:
        return b"".join(
            [
                MAGIC,
                struct.pack(">B", self.version),
                self.nonce,
                struct.pack(">I", self.block_count),
                struct.pack(">H", len(self.dset)),
                b"".join(struct.pack(">I", i) for i in self.dset),
                self.blocks,
            ]
        )

    @classmethod
    def from_bytes(cls, blob: bytes) -> "FileCiphertext":
        if len(blob) < 27 or blob[:4] != MAGIC:
            raise ValueError("not a ciphertext blob (bad magic)")
        version = blob[4]
        if version != VERSION:
            raise ValueError(f"unsupported blob version {version}")
        nonce = blob[5:21]
        (block_count,) = struct.unpack(">I", blob[21:25])
        (dsize,) = struct.unpack(">H", blob[25:27])
        off = 27
        if len(blob) < off + 4 * dsize:
            raise ValueError("truncated designated-set table")
        dset = struct.unpack(f">{dsize}I", blob[off : off + 4 * dsize])
        off += 4 * dsize
        blocks = blob[off:]
        if len(blocks) != block_count * BLOCK_SIZE:
            raise ValueError("blob length does not match block count")
        return cls(version, nonce, block_count, tuple(dset), blocks)


@dataclass(frozen=True)
class ReEncryptionKey:
    """Transformation rule: fresh nonce plus one XOR pad per designated block."""

    new_nonce: bytes
    pads: dict[int, bytes]

    def __post_init__(self):
        if len(self.new_nonce) != BLOCK_SIZE:
            raise SizeError("new_nonce must be 16 bytes")
        if not self.pads:
            raise ValueError("pads must be non-empty")
        for i, p in self.pads.items():
            if i < 1:
                raise ValueError("pad indices are 1-based")
            if len(p) != BLOCK_SIZE:
                raise SizeError("each pad must be 16 bytes")

    def to_bytes(self) -> bytes:
        items = sorted(self.pads.items())
        body = b"".join(struct.pack(">I", i) + p for i, p in items)
        return self.new_nonce + struct.pack(">H", len(items)) + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "ReEncryptionKey":
        if len(data) < 18:
            raise ValueError("re-encryption key too short")
        new_nonce = data[:16]
        (count,) = struct.unpack(">H", data[16:18])
        if len(data) != 18 + count * 20:
            raise ValueError("re-encryption key length mismatch")
        pads = {}
        for k in range(count):
            off = 18 + 20 * k
            (i,) = struct.unpack(">I", data[off : off + 4])
            pads[i] = data[off + 4 : off + 20]
        return cls(new_nonce, pads)


def keystream(key: bytes, nonce: bytes, index: int, cipher=AES128) -> bytes:
    """Counter-mode pad for 1-based block index: E_key(nonce + index mod 2^w)."""
    if index < 1:
        raise ValueError("keystream index is 1-based")
    width = cipher.block_size
    counter = (int.from_bytes(nonce, "big") + index) % (1 << (8 * width))
    return cipher.encrypt_block(key, counter.to_bytes(width, "big"))


def _bulk_keystream(key: bytes, nonce: bytes, indices: Sequence[int]) -> bytes:
    return AES128.encrypt_ecb(key, _kernels.offset_counters(nonce, indices))


def _xor_at_indices(blocks: bytes, indices: Sequence[int], pads: bytes) -> bytes:
    out = bytearray(blocks)
    for k, i in enumerate(indices):
        off = (i - 1) * BLOCK_SIZE
        pad_block = pads[k * BLOCK_SIZE : (k + 1) * BLOCK_SIZE]
        out[off : off + BLOCK_SIZE] = _kernels.xor_bytes(
            bytes(out[off : off + BLOCK_SIZE]), pad_block
        )
    return bytes(out)


def pre_encrypt(
    key: bytes,
    plaintext: bytes,
    policy: str | DesignationPolicy = "last",
    *,
    rng: RandomSource | None = None,
    max_size: int = MAX_MESSAGE_SIZE,
) -> FileCiphertext:
    """Encrypt under the file key: pad, transform, mask the designated blocks."""
    rng = coerce_rng(rng)
    pseudo = aont_forward(pad(plaintext, max_size=max_size), rng.sym_key())
    block_count = len(pseudo) // BLOCK_SIZE
    dset = _normalize_dset(resolve_policy(policy)(block_count), block_count)
    nonce = rng.nonce()
    blocks = _xor_at_indices(pseudo, dset, _bulk_keystream(key, nonce, dset))
    return FileCiphertext(VERSION, nonce, block_count, dset, blocks)


def pre_decrypt(key: bytes, ct: FileCiphertext) -> bytes:
    """Strip the keystream from the designated blocks, invert, unpad.

    Raises PaddingError for a wrong key or a corrupted blob.
    """
    pseudo = _xor_at_indices(
        ct.blocks, ct.dset, _bulk_keystream(key, ct.nonce, ct.dset)
    )
    return unpad(aont_inverse(pseudo))


def rekey(
    old_key: bytes,
    old_nonce: bytes,
    new_key: bytes,
    dset: Iterable[int],
    *,
    rng: RandomSource | None = None,
    cipher=AES128,
) -> ReEncryptionKey:
    """Build the old-to-new transformation rule for the designated blocks.

    pads[i] cancels the old keystream and applies the new one in a single
    XOR; neither key can be read back out of a pad alone.
    """
    rng = coerce_rng(rng)
    indices = tuple(sorted(set(int(i) for i in dset)))
    if not indices:
        raise ValueError("designated block set must be non-empty")
    new_nonce = rng.bytes(cipher.block_size)
    if cipher is AES128:
        flat = _kernels.xor_bytes(
            _bulk_keystream(old_key, old_nonce, indices),
            _bulk_keystream(new_key, new_nonce, indices),
        )
        pads = {
            i: flat[k * BLOCK_SIZE : (k + 1) * BLOCK_SIZE]
            for k, i in enumerate(indices)
        }
    else:
        pads = {
            i: _kernels.xor_bytes(
                keystream(old_key, old_nonce, i, cipher),
                keystream(new_key, new_nonce, i, cipher),
            )
            for i in indices
        }
    return ReEncryptionKey(new_nonce, pads)


def reencrypt(rk: ReEncryptionKey, ct: FileCiphertext) -> FileCiphertext:
    """Apply the transformation rule: XOR pads onto D, swap in the new nonce.

    Every block outside D is byte-identical to the input.
    """
    if tuple(sorted(rk.pads)) != ct.dset:
        raise ValueError("re-encryption key does not match the ciphertext's designated set")
    pads = b"".join(rk.pads[i] for i in ct.dset)
    blocks = _xor_at_indices(ct.blocks, ct.dset, pads)
    return FileCiphertext(ct.version, rk.new_nonce, ct.block_count, ct.dset, blocks)
