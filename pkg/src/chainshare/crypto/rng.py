"""Injectable randomness source.

Every key, nonce and inner-key draw in the package flows through a
:class:`RandomSource` so seeded runs are bit-reproducible.  Without a seed the
source falls back to system entropy (``random.SystemRandom``), which is the
default for the CLI.
"""

from __future__ import annotations

import random

KEY_SIZE = 16
NONCE_SIZE = 16


class RandomSource:
    """Byte/choice generator, deterministic when constructed with a seed."""

    def __init__(self, seed: int | None = None):
        self.seeded = seed is not None
        self._rand: random.Random = (
            random.Random(seed) if seed is not None else random.SystemRandom()
        )

    def bytes(self, n: int) -> bytes:
        return self._rand.getrandbits(8 * n).to_bytes(n, "big") if n else b""

    def sym_key(self) -> bytes:
        return self.bytes(KEY_SIZE)

    def nonce(self) -> bytes:
        return self.bytes(NONCE_SIZE)

    def randrange(self, n: int) -> int:
        return self._rand.randrange(n)

    def choice(self, seq):
        return self._rand.choice(seq)

    # State save/restore is only meaningful for seeded sources; the CLI uses
    # it to stay deterministic across separate invocations.
    def getstate(self):
        if not self.seeded:
            raise ValueError("system-entropy source has no state")
        return self._rand.getstate()

    def setstate(self, state) -> None:
        if not self.seeded:
            raise ValueError("system-entropy source has no state")
        version, internal, gauss = state
        self._rand.setstate((version, tuple(internal), gauss))


def coerce_rng(rng: RandomSource | None) -> RandomSource:
    return rng if rng is not None else RandomSource()
