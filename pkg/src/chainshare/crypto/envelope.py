"""Public-key envelope for wrapping small payloads to a recipient.

Hybrid construction: ephemeral X25519 agreement against the recipient's
static key, HKDF-SHA256 to derive an encryption and a MAC key, AES-128-CTR
for the body, HMAC-SHA256 over the whole blob.  Unwrapping with the wrong
private key or any bit flip in the blob fails the tag check.

Blob layout: ephemeral public key (32) | iv (16) | body | tag (32).
"""

from __future__ import annotations

import hmac
from dataclasses import dataclass

from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import EnvelopeError, SizeError
from .rng import RandomSource, coerce_rng

MAX_PAYLOAD = 4096
_TAG_SIZE = 32
_INFO = b"chainshare envelope v1"


@dataclass(frozen=True)
class KeyPair:
    """X25519 key pair as raw 32-byte strings."""

    public: bytes
    private: bytes


def envelope_keygen(rng: RandomSource | None = None) -> KeyPair:
    rng = coerce_rng(rng)
    priv = X25519PrivateKey.from_private_bytes(rng.bytes(32))
    return KeyPair(
        public=priv.public_key().public_bytes_raw(),
        private=priv.private_bytes_raw(),
    )


def _derive_keys(shared: bytes, eph_pub: bytes, recipient_pub: bytes) -> tuple[bytes, bytes]:
    okm = HKDF(
        algorithm=hashes.SHA256(),
        length=48,
        salt=None,
        info=_INFO + eph_pub + recipient_pub,
    ).derive(shared)
    return okm[:16], okm[16:]


def envelope_wrap(public: bytes, payload: bytes, *, rng: RandomSource | None = None) -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise SizeError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    rng = coerce_rng(rng)
    recipient = X25519PublicKey.from_public_bytes(public)
    eph_priv = X25519PrivateKey.from_private_bytes(rng.bytes(32))
    eph_pub = eph_priv.public_key().public_bytes_raw()
    enc_key, mac_key = _derive_keys(eph_priv.exchange(recipient), eph_pub, public)
    iv = rng.bytes(16)
    enc = Cipher(algorithms.AES(enc_key), modes.CTR(iv)).encryptor()
    body = enc.update(payload) + enc.finalize()
    tag = hmac.new(mac_key, eph_pub + iv + body, "sha256").digest()
    return eph_pub + iv + body + tag


def envelope_unwrap(private: bytes, blob: bytes) -> bytes:
    if len(blob) < 32 + 16 + _TAG_SIZE:
        raise EnvelopeError("blob too short")
    eph_pub, iv = blob[:32], blob[32:48]
    body, tag = blob[48:-_TAG_SIZE], blob[-_TAG_SIZE:]
    priv = X25519PrivateKey.from_private_bytes(private)
    recipient_pub = priv.public_key().public_bytes_raw()
    try:
        shared = priv.exchange(X25519PublicKey.from_public_bytes(eph_pub))
    except ValueError as exc:
        raise EnvelopeError("malformed ephemeral key") from exc
    enc_key, mac_key = _derive_keys(shared, eph_pub, recipient_pub)
    expected = hmac.new(mac_key, eph_pub + iv + body, "sha256").digest()
    if not hmac.compare_digest(tag, expected):
        raise EnvelopeError("integrity check failed")
    dec = Cipher(algorithms.AES(enc_key), modes.CTR(iv)).decryptor()
    return dec.update(body) + dec.finalize()
