"""Pure-Python byte kernels.

These are the behavioural reference for the compiled module
(:mod:`chainshare._kernels._speed`); both expose the same functions and must
return identical bytes for identical inputs.  Big-int arithmetic keeps the
XOR paths reasonably fast even without the extension.
"""

from __future__ import annotations

_MASK128 = (1 << 128) - 1


def xor_bytes(a: bytes, b: bytes) -> bytes:
    """XOR two equal-length byte strings."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    n = len(a)
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(n, "big")


def counter_blocks(start: int, count: int) -> bytes:
    """Concatenated 16-byte big-endian counters start, start+1, ..."""
    if start < 0 or count < 0:
        raise ValueError("start and count must be non-negative")
    return b"".join(i.to_bytes(16, "big") for i in range(start, start + count))


def offset_counters(base: bytes, indices) -> bytes:
    """Concatenated (base + i) mod 2**128 blocks for each index i."""
    if len(base) != 16:
        raise ValueError("base must be 16 bytes")
    n0 = int.from_bytes(base, "big")
    return b"".join(((n0 + i) & _MASK128).to_bytes(16, "big") for i in indices)


def xor_fold(data: bytes, width: int = 16) -> bytes:
    """XOR all consecutive width-byte blocks of data into one block."""
    if width <= 0 or len(data) % width != 0 or not data:
        raise ValueError("data must be a non-empty multiple of width")
    acc = 0
    for off in range(0, len(data), width):
        acc ^= int.from_bytes(data[off : off + width], "big")
    return acc.to_bytes(width, "big")


def byte_histogram(data: bytes) -> list[int]:
    """Occurrence count of each byte value 0..255."""
    counts = [0] * 256
    for v in data:
        counts[v] += 1
    return counts


def count_consistent_toy_keys(sbox: bytes, inputs: bytes, targets: bytes) -> int:
    """Count 16-bit toy-cipher keys k with E_k(x) == t for every (x, t) pair.

    The toy cipher is E_(hi,lo)(x) = sbox[x ^ lo] ^ hi.  For each of the 256
    values of lo the first constraint pins hi uniquely, so scanning lo and
    verifying the remaining constraints counts exactly the same keys as a
    brute-force pass over all 65536 (hi, lo) pairs.
    """
    if len(sbox) != 256:
        raise ValueError("sbox must be 256 bytes")
    if not inputs or len(inputs) != len(targets):
        raise ValueError("need equal, non-empty input/target byte strings")
    count = 0
    for lo in range(256):
        hi = sbox[inputs[0] ^ lo] ^ targets[0]
        if all(sbox[x ^ lo] ^ hi == t for x, t in zip(inputs, targets)):
            count += 1
    return count
