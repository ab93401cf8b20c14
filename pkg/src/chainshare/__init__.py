"""Encrypted file sharing over untrusted storage, with an on-chain key ledger.

Data never leaves the owner's machine unencrypted; what goes on chain is
metadata plus the file key wrapped under the owner's public key.  Sharing
re-encrypts the stored ciphertext in place -- a storage node applies an
owner-supplied XOR rule to a few designated blocks and forwards the result,
anonymously, to a second node -- so the plaintext, the old key and the new
key are never exposed to either node.  An analysis harness replays runs of
the protocol against colluding parties.

Subpackages and modules:

* :mod:`chainshare.crypto` -- block transform, counter-mode masking,
  re-encryption rules, public-key envelopes.
* :mod:`chainshare.ledger` -- the hash-chained metadata ledger.
* :mod:`chainshare.netsim` -- deterministic message-passing network model.
* :mod:`chainshare.protocol` -- store / retrieve / share / accept flows.
* :mod:`chainshare.attacks` -- knowledge closure, feasibility, statistics.
* :mod:`chainshare.cli` -- the ``chainshare`` command.
"""

from .crypto import (
    FileCiphertext,
    KeyPair,
    RandomSource,
    ReEncryptionKey,
    envelope_keygen,
    envelope_unwrap,
    envelope_wrap,
    pre_decrypt,
    pre_encrypt,
    reencrypt,
    rekey,
)
from .ledger import Chain, MetadataRecord, ShareRecord
from .netsim import Message, MessageKind, Network, Trace, new_network
from .protocol import (
    Contact,
    IntegrityError,
    NotAuthorizedError,
    NotFoundError,
    ProtocolError,
    ProtocolRun,
    ShareGrant,
    UserAgent,
    accept_share,
    retrieve_file,
    run_sharing_scenario,
    share_file,
    store_file,
)

__version__ = "0.1.0"

__all__ = [
    "Chain",
    "Contact",
    "FileCiphertext",
    "IntegrityError",
    "KeyPair",
    "Message",
    "MessageKind",
    "MetadataRecord",
    "Network",
    "NotAuthorizedError",
    "NotFoundError",
    "ProtocolError",
    "ProtocolRun",
    "RandomSource",
    "ReEncryptionKey",
    "ShareGrant",
    "ShareRecord",
    "Trace",
    "UserAgent",
    "accept_share",
    "envelope_keygen",
    "envelope_unwrap",
    "envelope_wrap",
    "new_network",
    "pre_decrypt",
    "pre_encrypt",
    "reencrypt",
    "rekey",
    "retrieve_file",
    "run_sharing_scenario",
    "share_file",
    "store_file",
    "__version__",
]
