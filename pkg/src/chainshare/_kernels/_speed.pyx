# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled byte kernels; contract documented in _pure.py."""

from cpython.bytes cimport PyBytes_FromStringAndSize, PyBytes_AS_STRING

from libc.stdint cimport uint8_t, uint64_t


def xor_bytes(bytes a, bytes b):
    cdef Py_ssize_t n = len(a)
    if n != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    cdef bytes out = PyBytes_FromStringAndSize(NULL, n)
    cdef const uint8_t *pa = <const uint8_t *> PyBytes_AS_STRING(a)
    cdef const uint8_t *pb = <const uint8_t *> PyBytes_AS_STRING(b)
    cdef uint8_t *po = <uint8_t *> PyBytes_AS_STRING(out)
    cdef Py_ssize_t i
    for i in range(n):
        po[i] = pa[i] ^ pb[i]
    return out


cdef inline void _write_u128(uint8_t *dst, uint64_t hi, uint64_t lo) nogil:
    cdef int j
    for j in range(8):
        dst[j] = <uint8_t> (hi >> (56 - 8 * j))
        dst[8 + j] = <uint8_t> (lo >> (56 - 8 * j))


def counter_blocks(object start, object count):
    cdef uint64_t s = start
    cdef Py_ssize_t c = count
    if c < 0:
        raise ValueError("start and count must be non-negative")
    cdef bytes out = PyBytes_FromStringAndSize(NULL, 16 * c)
    cdef uint8_t *po = <uint8_t *> PyBytes_AS_STRING(out)
    cdef Py_ssize_t i
    for i in range(c):
        _write_u128(po + 16 * i, 0, s + <uint64_t> i)
    return out


def offset_counters(bytes base, object indices):
    if len(base) != 16:
        raise ValueError("base must be 16 bytes")
    cdef const uint8_t *pb = <const uint8_t *> PyBytes_AS_STRING(base)
    cdef uint64_t bhi = 0, blo = 0
    cdef int j
    for j in range(8):
        bhi = (bhi << 8) | pb[j]
        blo = (blo << 8) | pb[8 + j]
    idx = list(indices)
    cdef Py_ssize_t n = len(idx)
    cdef bytes out = PyBytes_FromStringAndSize(NULL, 16 * n)
    cdef uint8_t *po = <uint8_t *> PyBytes_AS_STRING(out)
    cdef Py_ssize_t k
    cdef uint64_t i64, lo, hi
    for k in range(n):
        i64 = idx[k]
        lo = blo + i64
        hi = bhi + (1 if lo < blo else 0)  # carry; wraps mod 2**128
        _write_u128(po + 16 * k, hi, lo)
    return out


def xor_fold(bytes data, int width=16):
    cdef Py_ssize_t n = len(data)
    if width <= 0 or n == 0 or n % width != 0:
        raise ValueError("data must be a non-empty multiple of width")
    cdef const uint8_t *pd = <const uint8_t *> PyBytes_AS_STRING(data)
    cdef bytes out = PyBytes_FromStringAndSize(NULL, width)
    cdef uint8_t *po = <uint8_t *> PyBytes_AS_STRING(out)
    cdef Py_ssize_t off, j2
    for j2 in range(width):
        po[j2] = 0
    for off in range(0, n, width):
        for j2 in range(width):
            po[j2] ^= pd[off + j2]
    return out


def byte_histogram(bytes data):
    cdef const uint8_t *pd = <const uint8_t *> PyBytes_AS_STRING(data)
    cdef Py_ssize_t n = len(data)
    cdef long counts[256]
    cdef int v
    for v in range(256):
        counts[v] = 0
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            counts[pd[i]] += 1
    return [counts[v] for v in range(256)]


def count_consistent_toy_keys(bytes sbox, bytes inputs, bytes targets):
    if len(sbox) != 256:
        raise ValueError("sbox must be 256 bytes")
    cdef Py_ssize_t m = len(inputs)
    if m == 0 or m != len(targets):
        raise ValueError("need equal, non-empty input/target byte strings")
    cdef const uint8_t *ps = <const uint8_t *> PyBytes_AS_STRING(sbox)
    cdef const uint8_t *px = <const uint8_t *> PyBytes_AS_STRING(inputs)
    cdef const uint8_t *pt = <const uint8_t *> PyBytes_AS_STRING(targets)
    cdef int key, hi, lo, ok
    cdef Py_ssize_t i
    cdef long count = 0
    with nogil:
        for key in range(65536):
            hi = key >> 8
            lo = key & 0xFF
            ok = 1
            for i in range(m):
                if (ps[px[i] ^ lo] ^ hi) != pt[i]:
                    ok = 0
                    break
            if ok:
                count += 1
    return count
