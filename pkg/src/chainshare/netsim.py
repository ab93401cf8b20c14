"""Deterministic event-driven model of the untrusted storage network.

Single FIFO queue, no loss, no reordering, no latency: identical seeds and
identical operation sequences produce byte-identical traces.  Every delivery
is recorded in the trace together with which node identifiers its payload
exposes, which is what the attack harness mines.

Storage is open-fetch: any party that knows a location and a blob id can
download the blob.  Secrecy of stored data therefore rests entirely on the
randomness of locations plus the encryption of the blobs themselves.

Relocation is anonymous by construction: a node forwarding a transformed
blob sends it with no sender identity, so the destination learns the blob
but not where it came from.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional

from .crypto.errors import SizeError
from .crypto.rng import RandomSource
from .crypto.scheme import FileCiphertext, ReEncryptionKey, reencrypt

NodeId = int


class ConfigurationError(Exception):
    pass


class MessageKind(str, Enum):
    STORE_BLOB = "STORE_BLOB"
    FETCH_BLOB = "FETCH_BLOB"
    BLOB_REPLY = "BLOB_REPLY"
    REENCRYPT_AND_FORWARD = "REENCRYPT_AND_FORWARD"
    TRANSFER_BLOB = "TRANSFER_BLOB"
    SAFE_CHANNEL = "SAFE_CHANNEL"


# Payload fields whose values are node identifiers, in the clear.
NODE_REF_KEYS = ("dest",)


@dataclass
class Message:
    kind: MessageKind
    to: NodeId
    payload: dict
    from_visible: Optional[NodeId] = None
    seq: int = -1


@dataclass(frozen=True)
class TraceEntry:
    seq: int
    kind: MessageKind
    frm: Optional[NodeId]
    to: NodeId
    payload: dict
    node_refs: tuple[NodeId, ...]
    error: Optional[str] = None


def _payload_digest(payload: dict) -> str:
    h = hashlib.sha256()
    for key in sorted(payload):
        value = payload[key]
        h.update(key.encode())
        h.update(b"=")
        if isinstance(value, bytes):
            h.update(value)
        else:
            h.update(str(value).encode())
        h.update(b"|")
    return h.hexdigest()


def _payload_summary(payload: dict) -> dict:
    summary = {}
    for key in sorted(payload):
        value = payload[key]
        if isinstance(value, bytes):
            summary[key] = {
                "len": len(value),
                "sha256": hashlib.sha256(value).hexdigest()[:16],
            }
        else:
            summary[key] = value
    return summary


class Trace:
    """Append-only, complete log of deliveries."""

    def __init__(self):
        self.entries: list[TraceEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def record(self, msg: Message, error: str | None = None) -> TraceEntry:
        refs = tuple(
            msg.payload[k] for k in NODE_REF_KEYS if isinstance(msg.payload.get(k), int)
        )
        entry = TraceEntry(
            seq=msg.seq,
            kind=msg.kind,
            frm=msg.from_visible,
            to=msg.to,
            payload=dict(msg.payload),
            node_refs=refs,
            error=error,
        )
        self.entries.append(entry)
        return entry

    def query(self, predicate: Callable[[TraceEntry], bool]) -> list[TraceEntry]:
        return [e for e in self.entries if predicate(e)]

    def deliveries_to(self, node: NodeId) -> list[TraceEntry]:
        return [e for e in self.entries if e.to == node]

    def identifiers_visible_to(self, node: NodeId) -> set[NodeId]:
        """Node ids the given node has seen: itself, visible senders, and
        node-valued payload fields of its own deliveries."""
        known = {node}
        for e in self.deliveries_to(node):
            if e.frm is not None:
                known.add(e.frm)
            known.update(e.node_refs)
        return known

    def to_jsonl(self) -> str:
        lines = []
        for e in self.entries:
            obj = {
                "seq": e.seq,
                "kind": e.kind.value,
                "from": e.frm,
                "to": e.to,
                "error": e.error,
                "payload_digest": _payload_digest(e.payload),
                "summary": _payload_summary(e.payload),
            }
            lines.append(json.dumps(obj, sort_keys=True, separators=(",", ":")))
        return "".join(line + "\n" for line in lines)


@dataclass
class NodeState:
    blobs: dict[bytes, bytes] = field(default_factory=dict)
    inbox: list[TraceEntry] = field(default_factory=list)


class Network:
    """The simulated network: nodes, FIFO queue, seeded rng, clock, trace."""

    def __init__(self, n_nodes: int, seed: int | None = None):
        if n_nodes < 4:
            raise ConfigurationError(
                "need at least 4 nodes (owner, receiver and two storage roles)"
            )
        self.nodes: dict[NodeId, NodeState] = {i: NodeState() for i in range(n_nodes)}
        self.queue: deque[Message] = deque()
        self.rng = RandomSource(seed)
        self.clock = 0
        self.trace = Trace()
        self.agent_ids: set[NodeId] = set()
        self._seq = 0

    # -- topology ----------------------------------------------------------

    def allocate_agent_node(self) -> NodeId:
        """Claim the lowest node id not yet occupied by an agent."""
        for node in sorted(self.nodes):
            if node not in self.agent_ids:
                self.agent_ids.add(node)
                return node
        raise ConfigurationError("no free node for another agent")

    def mark_agent(self, node: NodeId) -> None:
        """Claim a specific node for an agent (workspace restore path)."""
        if node not in self.nodes:
            raise ConfigurationError(f"no node {node} in this network")
        self.agent_ids.add(node)

    def storage_candidates(self, exclude: Iterable[NodeId] = ()) -> list[NodeId]:
        banned = set(exclude) | self.agent_ids
        return [n for n in sorted(self.nodes) if n not in banned]

    def pick_node(self, exclude: Iterable[NodeId] = ()) -> NodeId:
        """Uniformly random node outside the exclusion set (agents excluded)."""
        candidates = self.storage_candidates(exclude)
        if not candidates:
            raise ConfigurationError("no eligible node outside the exclusion set")
        return self.rng.choice(candidates)

    # -- messaging ---------------------------------------------------------

    def post(self, msg: Message) -> None:
        if msg.kind == MessageKind.TRANSFER_BLOB and msg.from_visible is not None:
            raise ValueError("TRANSFER_BLOB must be sent without a sender identity")
        msg.seq = self._seq
        self._seq += 1
        self.queue.append(msg)

    def run_until_idle(self, max_steps: int = 1_000_000) -> list[TraceEntry]:
        """Deliver queued messages to quiescence; returns the trace delta."""
        delta: list[TraceEntry] = []
        steps = 0
        while self.queue:
            steps += 1
            if steps > max_steps:
                raise RuntimeError("message cascade did not terminate")
            msg = self.queue.popleft()
            self.clock += 1
            if msg.to not in self.nodes:
                delta.append(self.trace.record(msg, error="unknown destination"))
                continue
            error = self._dispatch(msg)
            entry = self.trace.record(msg, error=error)
            delta.append(entry)
            if error is None and msg.kind in (
                MessageKind.BLOB_REPLY,
                MessageKind.SAFE_CHANNEL,
            ):
                self.nodes[msg.to].inbox.append(entry)
        return delta

    def _dispatch(self, msg: Message) -> str | None:
        state = self.nodes[msg.to]
        kind = msg.kind
        if kind == MessageKind.STORE_BLOB:
            state.blobs[msg.payload["blob_id"]] = msg.payload["blob"]
        elif kind == MessageKind.FETCH_BLOB:
            return self._handle_fetch(msg, state)
        elif kind == MessageKind.REENCRYPT_AND_FORWARD:
            return self._handle_reencrypt_and_forward(msg, state)
        elif kind == MessageKind.TRANSFER_BLOB:
            state.blobs[msg.payload["store_as"]] = msg.payload["blob"]
        return None

    def _handle_fetch(self, msg: Message, state: NodeState) -> str | None:
        if msg.from_visible is None:
            return "fetch without a reply address"
        blob_id = msg.payload["blob_id"]
        blob = state.blobs.get(blob_id)
        payload = {"blob_id": blob_id, "found": blob is not None}
        if blob is not None:
            payload["blob"] = blob
        self.post(
            Message(MessageKind.BLOB_REPLY, msg.from_visible, payload, from_visible=msg.to)
        )
        return None

    def _handle_reencrypt_and_forward(self, msg: Message, state: NodeState) -> str | None:
        blob_id = msg.payload["blob_id"]
        blob = state.blobs.get(blob_id)
        if blob is None:
            if msg.from_visible is not None:
                self.post(
                    Message(
                        MessageKind.BLOB_REPLY,
                        msg.from_visible,
                        {"blob_id": blob_id, "found": False},
                        from_visible=msg.to,
                    )
                )
            return "unknown blob"
        try:
            rk = ReEncryptionKey.from_bytes(msg.payload["rk"])
            transformed = reencrypt(rk, FileCiphertext.from_bytes(blob))
        except (ValueError, SizeError) as exc:
            return f"malformed transformation request: {exc}"
        # The node keeps its original blob; only the outbound copy is
        # transformed, and it travels with no sender identity.
        self.post(
            Message(
                MessageKind.TRANSFER_BLOB,
                msg.payload["dest"],
                {"store_as": msg.payload["store_as"], "blob": transformed.to_bytes()},
                from_visible=None,
            )
        )
        return None

    # -- storage inspection / fault injection ------------------------------

    def stored_blob(self, node: NodeId, blob_id: bytes) -> bytes | None:
        return self.nodes[node].blobs.get(blob_id)

    def flip_blob_bit(self, node: NodeId, blob_id: bytes, bit: int) -> None:
        """Corrupt one bit of a stored blob (fault injection for tests/audits)."""
        blob = bytearray(self.nodes[node].blobs[blob_id])
        blob[bit // 8] ^= 1 << (bit % 8)
        self.nodes[node].blobs[blob_id] = bytes(blob)


def new_network(n_nodes: int, seed: int | None = None) -> Network:
    return Network(n_nodes, seed)
