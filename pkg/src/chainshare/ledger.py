"""Append-only hash-chained metadata store.

Holds the wrapped-key records and sharing records off the storage path: the
chain carries metadata only, never file contents.  One authoritative chain,
deterministic sequencing, no consensus — what matters here is the storage
and tamper-evidence semantics.

Hashes are always computed over the canonical binary serialization (fields
in declaration order, big-endian fixed-width integers, raw byte fields,
length-prefixed variable parts).  The JSONL export is a faithful projection
of the same fields, never the hashing input.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Iterable, Union

from .crypto.hashing import DIGEST_SIZE, sha256

GENESIS_PREV = bytes(DIGEST_SIZE)
CHAIN_MAGIC = b"MKL1"

_TAG_METADATA = 1
_TAG_SHARE = 2


class LedgerError(Exception):
    pass


class LedgerCodecError(LedgerError):
    """Undecodable block data; carries the offending height."""

    def __init__(self, height: int, reason: str):
        super().__init__(f"block {height}: {reason}")
        self.height = height
        self.reason = reason


@dataclass(frozen=True)
class MetadataRecord:
    """Per-file record: content identity, storage location and the wrapped key."""

    file_id: bytes
    owner_id: int
    content_hash: bytes
    location: int
    wrapped_key: bytes
    created_at: int

    kind = "metadata"

    def to_canonical(self) -> bytes:
        return b"".join(
            [
                struct.pack(">B", _TAG_METADATA),
                self.file_id,
                struct.pack(">Q", self.owner_id),
                self.content_hash,
                struct.pack(">Q", self.location),
                struct.pack(">I", len(self.wrapped_key)),
                self.wrapped_key,
                struct.pack(">Q", self.created_at),
            ]
        )

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "file_id": self.file_id.hex(),
            "owner_id": self.owner_id,
            "content_hash": self.content_hash.hex(),
            "location": self.location,
            "wrapped_key": self.wrapped_key.hex(),
            "created_at": self.created_at,
        }


@dataclass(frozen=True)
class ShareRecord:
    """Sharing event: only a hash of the grant, no key material, no share node."""

    file_id: bytes
    owner_id: int
    grant_hash: bytes
    created_at: int

    kind = "share"

    def to_canonical(self) -> bytes:
        return b"".join(
            [
                struct.pack(">B", _TAG_SHARE),
                self.file_id,
                struct.pack(">Q", self.owner_id),
                self.grant_hash,
                struct.pack(">Q", self.created_at),
            ]
        )

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "file_id": self.file_id.hex(),
            "owner_id": self.owner_id,
            "grant_hash": self.grant_hash.hex(),
            "created_at": self.created_at,
        }


Record = Union[MetadataRecord, ShareRecord]


def record_from_json(obj: dict) -> Record:
    kind = obj.get("kind")
    if kind == "metadata":
        return MetadataRecord(
            file_id=bytes.fromhex(obj["file_id"]),
            owner_id=int(obj["owner_id"]),
            content_hash=bytes.fromhex(obj["content_hash"]),
            location=int(obj["location"]),
            wrapped_key=bytes.fromhex(obj["wrapped_key"]),
            created_at=int(obj["created_at"]),
        )
    if kind == "share":
        return ShareRecord(
            file_id=bytes.fromhex(obj["file_id"]),
            owner_id=int(obj["owner_id"]),
            grant_hash=bytes.fromhex(obj["grant_hash"]),
            created_at=int(obj["created_at"]),
        )
    raise ValueError(f"unknown record kind {kind!r}")


def _decode_record(data: bytes, off: int) -> tuple[Record, int]:
    tag = data[off]
    if tag == _TAG_METADATA:
        end = off + 1 + 32 + 8 + 32 + 8 + 4
        if len(data) < end:
            raise ValueError("truncated metadata record")
        file_id = data[off + 1 : off + 33]
        (owner_id,) = struct.unpack(">Q", data[off + 33 : off + 41])
        content_hash = data[off + 41 : off + 73]
        (location,) = struct.unpack(">Q", data[off + 73 : off + 81])
        (klen,) = struct.unpack(">I", data[off + 81 : off + 85])
        if len(data) < end + klen + 8:
            raise ValueError("truncated wrapped key")
        wrapped_key = data[end : end + klen]
        (created_at,) = struct.unpack(">Q", data[end + klen : end + klen + 8])
        rec = MetadataRecord(file_id, owner_id, content_hash, location, wrapped_key, created_at)
        return rec, end + klen + 8
    if tag == _TAG_SHARE:
        end = off + 1 + 32 + 8 + 32 + 8
        if len(data) < end:
            raise ValueError("truncated share record")
        file_id = data[off + 1 : off + 33]
        (owner_id,) = struct.unpack(">Q", data[off + 33 : off + 41])
        grant_hash = data[off + 41 : off + 73]
        (created_at,) = struct.unpack(">Q", data[off + 73 : off + 81])
        return ShareRecord(file_id, owner_id, grant_hash, created_at), end
    raise ValueError(f"unknown record tag {tag}")


@dataclass(frozen=True)
class LedgerBlock:
    height: int
    prev_hash: bytes
    timestamp: int
    records: tuple[Record, ...]
    block_hash: bytes

    def to_canonical(self) -> bytes:
        """Hashing input; excludes block_hash itself."""
        return b"".join(
            [
                struct.pack(">Q", self.height),
                self.prev_hash,
                struct.pack(">Q", self.timestamp),
                struct.pack(">I", len(self.records)),
                b"".join(r.to_canonical() for r in self.records),
            ]
        )

    def to_json(self) -> dict:
        return {
            "height": self.height,
            "prev_hash": self.prev_hash.hex(),
            "timestamp": self.timestamp,
            "records": [r.to_json() for r in self.records],
            "block_hash": self.block_hash.hex(),
        }


def block_canonical(
    height: int, prev_hash: bytes, timestamp: int, records: Iterable[Record]
) -> bytes:
    recs = tuple(records)
    return b"".join(
        [
            struct.pack(">Q", height),
            prev_hash,
            struct.pack(">Q", timestamp),
            struct.pack(">I", len(recs)),
            b"".join(r.to_canonical() for r in recs),
        ]
    )


def decode_block_canonical(data: bytes, block_hash: bytes) -> LedgerBlock:
    """Parse a block back out of its canonical byte form."""
    if len(data) < 8 + 32 + 8 + 4:
        raise ValueError("truncated block header")
    (height,) = struct.unpack(">Q", data[0:8])
    prev_hash = data[8:40]
    (timestamp,) = struct.unpack(">Q", data[40:48])
    (nrec,) = struct.unpack(">I", data[48:52])
    records = []
    off = 52
    for _ in range(nrec):
        if off >= len(data):
            raise ValueError("record count exceeds data")
        rec, off = _decode_record(data, off)
        records.append(rec)
    if off != len(data):
        raise ValueError("trailing bytes after records")
    return LedgerBlock(height, prev_hash, timestamp, tuple(records), block_hash)


def _seal(height: int, prev_hash: bytes, timestamp: int, records: tuple[Record, ...]) -> LedgerBlock:
    digest = sha256(block_canonical(height, prev_hash, timestamp, records))
    return LedgerBlock(height, prev_hash, timestamp, records, digest)


@dataclass(frozen=True)
class VerifyReport:
    ok: bool
    height: int | None = None
    reason: str | None = None


class Chain:
    """Single-writer chain of sealed blocks.

    Appends are serialized by whoever owns the instance; a verified snapshot
    (the blocks tuple) is safe to read concurrently.
    """

    def __init__(self, blocks: Iterable[LedgerBlock]):
        self.blocks: list[LedgerBlock] = list(blocks)

    @classmethod
    def genesis(cls) -> "Chain":
        return cls([_seal(0, GENESIS_PREV, 0, ())])

    @property
    def tip(self) -> LedgerBlock:
        return self.blocks[-1]

    def __len__(self) -> int:
        return len(self.blocks)

    def append(self, records: Iterable[Record], timestamp: int | None = None) -> LedgerBlock:
        recs = tuple(records)
        if not recs:
            raise ValueError("cannot append an empty record list")
        report = self.verify()
        if not report.ok:
            raise LedgerError(
                f"refusing to append to an invalid chain "
                f"(height {report.height}: {report.reason})"
            )
        tip = self.tip
        ts = timestamp if timestamp is not None else tip.timestamp + 1
        block = _seal(tip.height + 1, tip.block_hash, ts, recs)
        self.blocks.append(block)
        return block

    def verify(self) -> VerifyReport:
        if not self.blocks:
            return VerifyReport(False, 0, "empty chain")
        for idx, block in enumerate(self.blocks):
            if block.height != idx:
                return VerifyReport(False, idx, f"height {block.height}, expected {idx}")
            if idx == 0:
                if block.prev_hash != GENESIS_PREV:
                    return VerifyReport(False, 0, "genesis prev_hash not zero")
            elif block.prev_hash != self.blocks[idx - 1].block_hash:
                return VerifyReport(False, idx, "broken link to previous block")
            if sha256(block.to_canonical()) != block.block_hash:
                return VerifyReport(False, idx, "block hash mismatch")
        return VerifyReport(True)

    def find_records(
        self,
        *,
        owner_id: int | None = None,
        file_id: bytes | None = None,
        kind: str | None = None,
    ) -> list[Record]:
        """All matching records in chain order."""
        out: list[Record] = []
        for block in self.blocks:
            for rec in block.records:
                if owner_id is not None and rec.owner_id != owner_id:
                    continue
                if file_id is not None and rec.file_id != file_id:
                    continue
                if kind is not None and rec.kind != kind:
                    continue
                out.append(rec)
        return out

    def to_bytes(self) -> bytes:
        """Canonical binary form of the whole chain: magic, block count, then
        per block a length-prefixed canonical body followed by its hash."""
        parts = [CHAIN_MAGIC, struct.pack(">I", len(self.blocks))]
        for block in self.blocks:
            body = block.to_canonical()
            parts.append(struct.pack(">I", len(body)))
            parts.append(body)
            parts.append(block.block_hash)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Chain":
        """Inverse of :meth:`to_bytes`; undecodable bytes raise
        :class:`LedgerCodecError` naming the block being decoded."""
        if data[:4] != CHAIN_MAGIC:
            raise LedgerCodecError(0, "bad chain magic")
        if len(data) < 8:
            raise LedgerCodecError(0, "truncated chain header")
        (count,) = struct.unpack(">I", data[4:8])
        blocks = []
        off = 8
        for idx in range(count):
            if len(data) < off + 4:
                raise LedgerCodecError(idx, "truncated block length")
            (blen,) = struct.unpack(">I", data[off : off + 4])
            off += 4
            if len(data) < off + blen + DIGEST_SIZE:
                raise LedgerCodecError(idx, "truncated block body")
            body = data[off : off + blen]
            block_hash = data[off + blen : off + blen + DIGEST_SIZE]
            off += blen + DIGEST_SIZE
            try:
                blocks.append(decode_block_canonical(body, block_hash))
            except ValueError as exc:
                raise LedgerCodecError(idx, str(exc)) from exc
        if off != len(data):
            raise LedgerCodecError(count - 1 if count else 0, "trailing bytes after chain")
        return cls(blocks)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(b.to_json(), sort_keys=True, separators=(",", ":")) + "\n"
            for b in self.blocks
        )

    @classmethod
    def from_jsonl(cls, text: str) -> "Chain":
        blocks = []
        for idx, line in enumerate(s for s in text.splitlines() if s.strip()):
            try:
                obj = json.loads(line)
                block = LedgerBlock(
                    height=int(obj["height"]),
                    prev_hash=bytes.fromhex(obj["prev_hash"]),
                    timestamp=int(obj["timestamp"]),
                    records=tuple(record_from_json(r) for r in obj["records"]),
                    block_hash=bytes.fromhex(obj["block_hash"]),
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise LedgerCodecError(idx, str(exc)) from exc
            blocks.append(block)
        return cls(blocks)
