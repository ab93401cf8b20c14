"""Error types raised by the crypto layer."""


class CryptoError(Exception):
    """Base class for crypto-layer failures."""


class SizeError(CryptoError):
    """Input violates a length bound (key/block/nonce size, message limit)."""


class PaddingError(CryptoError):
    """Padding check failed; the usual signal for a wrong key or a corrupted blob."""


class EnvelopeError(CryptoError):
    """Envelope integrity check failed or the private key does not match."""
