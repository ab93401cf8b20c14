"""Owner/receiver workflows on top of the ledger and the storage network.

The owner keeps no state besides a private key.  Everything needed to come
back to a file later -- its key, counter nonce, block-designation policy and
block count -- is wrapped under the owner's own public key and published on
chain, next to the storage location and a content hash.

Sharing never touches the plaintext and never ships the file key:

1. the owner derives a fresh key and a per-block transformation rule,
2. the holding node applies the rule and forwards the transformed blob,
   anonymously, to a second node chosen by the owner,
3. the receiver gets the new key and the new location over a safe channel,
   wrapped under the receiver's public key.

The holding node never learns where the transformed copy went *from whom*;
the second node never learns who held the original; the receiver never
learns who held the original either.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

from .crypto import (
    EnvelopeError,
    FileCiphertext,
    KeyPair,
    PaddingError,
    envelope_keygen,
    envelope_unwrap,
    envelope_wrap,
    pre_decrypt,
    pre_encrypt,
    rekey,
    resolve_policy,
    sha256,
)
from .ledger import Chain, MetadataRecord, ShareRecord
from .netsim import Message, MessageKind, Network, NodeId, new_network


class ProtocolError(Exception):
    code = "protocol"


class NotFoundError(ProtocolError):
    code = "not-found"


class NotAuthorizedError(ProtocolError):
    code = "not-authorized"


class IntegrityError(ProtocolError):
    code = "integrity"


# -- wire formats ----------------------------------------------------------

METAKEY_VERSION = 1
GRANT_VERSION = 1
GRANT_SIZE = 89

_POLICY_TAGS = {"last": 1, "first-last": 2, "all": 3}
_POLICY_NAMES = {tag: name for name, tag in _POLICY_TAGS.items()}


def pack_meta_key(key: bytes, nonce: bytes, policy: str, block_count: int) -> bytes:
    """File key + decryption context, as wrapped under the owner's key."""
    try:
        tag = _POLICY_TAGS[policy]
    except KeyError:
        raise ValueError(f"unknown designation policy {policy!r}") from None
    return struct.pack(">B16s16sBI", METAKEY_VERSION, key, nonce, tag, block_count)


def unpack_meta_key(payload: bytes) -> tuple[bytes, bytes, str, int]:
    if len(payload) != 38:
        raise ValueError(f"meta-key payload must be 38 bytes, got {len(payload)}")
    version, key, nonce, tag, block_count = struct.unpack(">B16s16sBI", payload)
    if version != METAKEY_VERSION:
        raise ValueError(f"unsupported meta-key version {version}")
    if tag not in _POLICY_NAMES:
        raise ValueError(f"unknown designation policy tag {tag}")
    return key, nonce, _POLICY_NAMES[tag], block_count


@dataclass(frozen=True)
class Contact:
    """How to reach a party: their node id and their public key."""

    node: NodeId
    public: bytes


@dataclass(frozen=True)
class ShareGrant:
    """Everything the receiver needs: where the copy is, and its key."""

    file_id: bytes
    share_location: NodeId
    shared_blob_id: bytes
    new_key: bytes

    def to_bytes(self) -> bytes:
        return struct.pack(
            ">B32sQ32s16s",
            GRANT_VERSION,
            self.file_id,
            self.share_location,
            self.shared_blob_id,
            self.new_key,
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "ShareGrant":
        if len(data) != GRANT_SIZE:
            raise ValueError(f"grant must be {GRANT_SIZE} bytes, got {len(data)}")
        version, file_id, location, blob_id, new_key = struct.unpack(
            ">B32sQ32s16s", data
        )
        if version != GRANT_VERSION:
            raise ValueError(f"unsupported grant version {version}")
        return cls(file_id, location, blob_id, new_key)


# -- parties ---------------------------------------------------------------

class UserAgent:
    """A protocol party: a node of its own plus an asymmetric key pair."""

    def __init__(
        self,
        network: Network,
        chain: Chain,
        *,
        label: str = "",
        node: NodeId | None = None,
        keys: KeyPair | None = None,
    ):
        self.network = network
        self.chain = chain
        self.label = label
        if node is None:
            self.node = network.allocate_agent_node()
        else:
            network.mark_agent(node)
            self.node = node
        self.keys: KeyPair = keys if keys is not None else envelope_keygen(network.rng)

    @property
    def public(self) -> bytes:
        return self.keys.public

    def contact(self) -> Contact:
        return Contact(self.node, self.keys.public)

    def store(self, data: bytes, policy: str = "last") -> bytes:
        return store_file(self, data, policy)

    def retrieve(self, file_id: bytes) -> bytes:
        return retrieve_file(self, file_id)

    def share(self, file_id: bytes, receiver: Contact) -> ShareGrant:
        return share_file(self, file_id, receiver)

    def accept(self, wrapped: bytes | None = None) -> bytes:
        return accept_share(self, wrapped=wrapped)


def _fetch_blob(agent: UserAgent, location: NodeId, blob_id: bytes) -> bytes:
    """Fetch one blob and wait for the reply; NotFoundError if it isn't there."""
    net = agent.network
    net.post(
        Message(
            MessageKind.FETCH_BLOB,
            location,
            {"blob_id": blob_id},
            from_visible=agent.node,
        )
    )
    delta = net.run_until_idle()
    for entry in delta:
        if (
            entry.kind == MessageKind.BLOB_REPLY
            and entry.to == agent.node
            and entry.payload.get("blob_id") == blob_id
        ):
            if not entry.payload.get("found"):
                raise NotFoundError(
                    f"node {location} does not hold blob {blob_id.hex()[:16]}"
                )
            return entry.payload["blob"]
    raise NotFoundError(f"no reply from node {location}")


def _latest_metadata(chain: Chain, file_id: bytes) -> MetadataRecord:
    records = chain.find_records(file_id=file_id, kind="metadata")
    if not records:
        raise NotFoundError(f"no file {file_id.hex()[:16]} on chain")
    return records[-1]


# -- operations ------------------------------------------------------------

def store_file(owner: UserAgent, data: bytes, policy: str = "last") -> bytes:
    """Encrypt, upload to a random node, publish location + wrapped key.

    Returns the file id (hash of the stored blob).
    """
    net = owner.network
    key = net.rng.sym_key()
    ct = pre_encrypt(key, data, policy, rng=net.rng)
    blob = ct.to_bytes()
    file_id = sha256(blob)

    location = net.pick_node(exclude={owner.node})
    net.post(
        Message(
            MessageKind.STORE_BLOB,
            location,
            {"blob_id": file_id, "blob": blob},
            from_visible=owner.node,
        )
    )
    net.run_until_idle()

    wrapped = envelope_wrap(
        owner.public,
        pack_meta_key(key, ct.nonce, _policy_name(policy), ct.block_count),
        rng=net.rng,
    )
    owner.chain.append(
        [
            MetadataRecord(
                file_id=file_id,
                owner_id=owner.node,
                content_hash=file_id,
                location=location,
                wrapped_key=wrapped,
                created_at=net.clock,
            )
        ]
    )
    return file_id


def _policy_name(policy) -> str:
    if isinstance(policy, str):
        resolve_policy(policy)  # validate early
        return policy
    for name, tag in _POLICY_TAGS.items():
        if resolve_policy(name) is policy:
            return name
    raise ValueError("policy must be one of " + ", ".join(sorted(_POLICY_TAGS)))


def _unwrap_meta_key(agent: UserAgent, record: MetadataRecord):
    try:
        return unpack_meta_key(envelope_unwrap(agent.keys.private, record.wrapped_key))
    except EnvelopeError:
        raise NotAuthorizedError(
            f"the wrapped key for file {record.file_id.hex()[:16]} is not addressed "
            "to this key pair"
        ) from None


def retrieve_file(agent: UserAgent, file_id: bytes) -> bytes:
    """Owner's read path: chain lookup, key unwrap, fetch, decrypt."""
    record = _latest_metadata(agent.chain, file_id)
    key, _nonce, _policy, _count = _unwrap_meta_key(agent, record)
    blob = _fetch_blob(agent, record.location, file_id)
    if sha256(blob) != record.content_hash:
        raise IntegrityError(f"blob for file {file_id.hex()[:16]} fails its content hash")
    try:
        return pre_decrypt(key, FileCiphertext.from_bytes(blob))
    except (PaddingError, ValueError) as exc:
        raise IntegrityError(f"blob does not decrypt cleanly: {exc}") from None


def share_file(owner: UserAgent, file_id: bytes, receiver: Contact) -> ShareGrant:
    """Grant the receiver access without re-uploading or revealing the key.

    Network effect, in order: a transformation request to the holding node,
    an anonymous transfer of the transformed blob to a fresh node, and a
    safe-channel notice to the receiver.  Appends a commitment to the grant
    on chain.
    """
    net = owner.network
    record = _latest_metadata(owner.chain, file_id)
    if record.owner_id != owner.node:
        raise NotAuthorizedError(f"file {file_id.hex()[:16]} belongs to another party")
    key, nonce, policy, block_count = _unwrap_meta_key(owner, record)

    new_key = net.rng.sym_key()
    dset = resolve_policy(policy)(block_count)
    rk = rekey(key, nonce, new_key, dset, rng=net.rng)
    share_location = net.pick_node(exclude={record.location})
    shared_blob_id = sha256(file_id + rk.new_nonce)

    net.post(
        Message(
            MessageKind.REENCRYPT_AND_FORWARD,
            record.location,
            {
                "blob_id": file_id,
                "rk": rk.to_bytes(),
                "dest": share_location,
                "store_as": shared_blob_id,
            },
            from_visible=owner.node,
        )
    )
    delta = net.run_until_idle()
    for entry in delta:
        if entry.error is not None:
            raise NotFoundError(f"relocation failed at node {entry.to}: {entry.error}")

    grant = ShareGrant(file_id, share_location, shared_blob_id, new_key)
    wrapped = envelope_wrap(receiver.public, grant.to_bytes(), rng=net.rng)
    net.post(
        Message(
            MessageKind.SAFE_CHANNEL,
            receiver.node,
            {"grant": wrapped},
            from_visible=owner.node,
        )
    )
    net.run_until_idle()

    owner.chain.append(
        [
            ShareRecord(
                file_id=file_id,
                owner_id=owner.node,
                grant_hash=sha256(wrapped),
                created_at=net.clock,
            )
        ]
    )
    return grant


def accept_share(
    receiver: UserAgent,
    wrapped: bytes | None = None,
    *,
    verify_grant: bool = True,
) -> bytes:
    """Receiver's read path: unwrap the notice, fetch the copy, decrypt it.

    With verify_grant the receiver additionally checks that the owner put a
    matching commitment on chain before trusting the grant.
    """
    if wrapped is None:
        notices = [
            e
            for e in receiver.network.nodes[receiver.node].inbox
            if e.kind == MessageKind.SAFE_CHANNEL
        ]
        if not notices:
            raise NotFoundError("no sharing notice in this party's inbox")
        wrapped = notices[-1].payload["grant"]

    try:
        grant = ShareGrant.from_bytes(envelope_unwrap(receiver.keys.private, wrapped))
    except EnvelopeError:
        raise NotAuthorizedError("the sharing notice is not addressed to this key pair") from None
    except ValueError as exc:
        raise IntegrityError(f"malformed grant: {exc}") from None

    if verify_grant:
        commits = receiver.chain.find_records(file_id=grant.file_id, kind="share")
        if not any(r.grant_hash == sha256(wrapped) for r in commits):
            raise NotAuthorizedError("no on-chain commitment matches this grant")

    blob = _fetch_blob(receiver, grant.share_location, grant.shared_blob_id)
    try:
        return pre_decrypt(grant.new_key, FileCiphertext.from_bytes(blob))
    except (PaddingError, ValueError) as exc:
        raise IntegrityError(f"shared blob does not decrypt cleanly: {exc}") from None


# -- end-to-end scenario ---------------------------------------------------

@dataclass
class ProtocolRun:
    """One full store/share/accept episode with everything the analysis needs."""

    seed: Optional[int]
    network: Network
    chain: Chain
    owner: UserAgent
    receiver: UserAgent
    plaintext: bytes
    file_id: bytes
    n1: NodeId
    n2: NodeId
    grant: ShareGrant
    wrapped_grant: bytes
    recovered: Optional[bytes]

    @property
    def trace(self):
        return self.network.trace


def run_sharing_scenario(
    seed: int | None = None,
    *,
    n_nodes: int = 8,
    data: bytes | None = None,
    policy: str = "last",
    accept: bool = True,
) -> ProtocolRun:
    """Two parties, one file: store it, share it, (optionally) read it back."""
    network = new_network(n_nodes, seed)
    chain = Chain.genesis()
    owner = UserAgent(network, chain, label="owner")
    receiver = UserAgent(network, chain, label="receiver")
    if data is None:
        data = network.rng.bytes(160)

    file_id = owner.store(data, policy)
    record = _latest_metadata(chain, file_id)
    grant = owner.share(file_id, receiver.contact())

    wrapped_grant = next(
        e.payload["grant"]
        for e in reversed(network.trace.deliveries_to(receiver.node))
        if e.kind == MessageKind.SAFE_CHANNEL
    )
    recovered = receiver.accept() if accept else None

    return ProtocolRun(
        seed=seed,
        network=network,
        chain=chain,
        owner=owner,
        receiver=receiver,
        plaintext=data,
        file_id=file_id,
        n1=record.location,
        n2=grant.share_location,
        grant=grant,
        wrapped_grant=wrapped_grant,
        recovered=recovered,
    )
