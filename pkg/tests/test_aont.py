"""The package transform: invertible, and all-or-nothing under tampering."""

import random

import pytest

from chainshare.crypto import AES128
from chainshare.crypto.aont import PUBLIC_DIGEST_KEY, aont_forward, aont_inverse
from chainshare.crypto.errors import SizeError
from chainshare import _kernels

RNG = random.Random(21)


def test_round_trip_various_sizes():
    for s in (1, 2, 3, 7, 64):
        blocks = RNG.randbytes(16 * s)
        key = RNG.randbytes(16)
        pseudo = aont_forward(blocks, key)
        assert len(pseudo) == 16 * (s + 1)
        assert aont_inverse(pseudo) == blocks


def test_output_depends_on_inner_key():
    blocks = RNG.randbytes(64)
    assert aont_forward(blocks, RNG.randbytes(16)) != aont_forward(
        blocks, RNG.randbytes(16)
    )


def test_key_block_construction():
    # Last pseudoblock = inner key XOR folded digests of the masked blocks.
    blocks = RNG.randbytes(32)
    key = RNG.randbytes(16)
    pseudo = aont_forward(blocks, key)
    masked = pseudo[:-16]
    ctrs = _kernels.counter_blocks(1, 2)
    digests = AES128.encrypt_ecb(PUBLIC_DIGEST_KEY, _kernels.xor_bytes(masked, ctrs))
    assert pseudo[-16:] == _kernels.xor_bytes(key, _kernels.xor_fold(digests))


def test_digest_key_is_the_public_constant():
    assert PUBLIC_DIGEST_KEY == bytes(16)


def test_single_zero_block_known_answer():
    # s = 1, zero data, zero inner key: masked = E_0(ctr_1); the digest of
    # masked XOR ctr_1 folds straight into the key block.
    pseudo = aont_forward(bytes(16), bytes(16))
    ctr1 = (1).to_bytes(16, "big")
    masked = AES128.encrypt_block(bytes(16), ctr1)
    digest = AES128.encrypt_block(bytes(16), _kernels.xor_bytes(masked, ctr1))
    assert pseudo == masked + digest
    assert aont_inverse(pseudo) == bytes(16)


def test_bit_flip_scrambles_every_block():
    for _ in range(10):
        s = RNG.randrange(2, 9)
        blocks = RNG.randbytes(16 * s)
        pseudo = aont_forward(blocks, RNG.randbytes(16))
        bit = RNG.randrange(16 * s * 8)  # only flip within the data blocks
        tampered = bytearray(pseudo)
        tampered[bit // 8] ^= 1 << (bit % 8)
        recovered = aont_inverse(bytes(tampered))
        for i in range(s):
            assert recovered[16 * i : 16 * (i + 1)] != blocks[16 * i : 16 * (i + 1)]


def test_flipping_the_key_block_also_scrambles():
    blocks = RNG.randbytes(48)
    pseudo = bytearray(aont_forward(blocks, RNG.randbytes(16)))
    pseudo[-1] ^= 0x40
    recovered = aont_inverse(bytes(pseudo))
    for i in range(3):
        assert recovered[16 * i : 16 * (i + 1)] != blocks[16 * i : 16 * (i + 1)]


def test_shape_errors():
    with pytest.raises(SizeError):
        aont_forward(b"", bytes(16))
    with pytest.raises(SizeError):
        aont_forward(b"short", bytes(16))
    with pytest.raises(SizeError):
        aont_inverse(bytes(16))  # no room for a key block
