"""Crypto layer: block primitives, the all-or-nothing transform, the
symmetric proxy re-encryption scheme, hashing and the public-key envelope."""

from .aont import PUBLIC_DIGEST_KEY, aont_forward, aont_inverse
from .cipher import AES128, BLOCK_SIZE, KEY_SIZE, ToyCipher
from .envelope import KeyPair, envelope_keygen, envelope_unwrap, envelope_wrap
from .errors import CryptoError, EnvelopeError, PaddingError, SizeError
from .hashing import DIGEST_SIZE, sha256
from .padding import MAX_MESSAGE_SIZE, pad, unpad
from .rng import RandomSource
from .scheme import (
    POLICIES,
    FileCiphertext,
    ReEncryptionKey,
    keystream,
    pre_decrypt,
    pre_encrypt,
    reencrypt,
    rekey,
    resolve_policy,
)

__all__ = [
    "AES128",
    "BLOCK_SIZE",
    "CryptoError",
    "DIGEST_SIZE",
    "EnvelopeError",
    "FileCiphertext",
    "KEY_SIZE",
    "KeyPair",
    "MAX_MESSAGE_SIZE",
    "POLICIES",
    "PUBLIC_DIGEST_KEY",
    "PaddingError",
    "RandomSource",
    "ReEncryptionKey",
    "SizeError",
    "ToyCipher",
    "aont_forward",
    "aont_inverse",
    "envelope_keygen",
    "envelope_unwrap",
    "envelope_wrap",
    "keystream",
    "pad",
    "pre_decrypt",
    "pre_encrypt",
    "reencrypt",
    "rekey",
    "resolve_policy",
    "sha256",
    "unpad",
]
