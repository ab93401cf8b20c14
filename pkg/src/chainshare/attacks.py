"""Adversarial analysis of a completed sharing run.

Three independent lenses:

* **Knowledge closure** -- what a coalition of parties could *compute* if it
  pooled everything the protocol handed each member.  Facts are atoms, the
  derivation rules are a small fixed set, and a coalition's power is the
  least fixed point of the rules over its pooled facts.

* **Feasibility** -- whether the coalition could *form* in the first place:
  colluders have to find each other, and the trace records exactly which
  node identifiers each party ever saw.

* **Statistics** -- chi-square sanity checks that ciphertext bytes look
  uniform, plus an exhaustive key search against a scaled-down cipher
  showing that a re-encryption rule does not pin down the old key.

Everything here is read-only over the run: no network activity, no
mutation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Iterable, Mapping, Optional, Sequence, Union

from scipy import stats

from . import _kernels
from .crypto import EnvelopeError, FileCiphertext, SizeError, ToyCipher, envelope_unwrap
from .crypto.rng import RandomSource, coerce_rng
from .crypto.scheme import MAGIC
from .netsim import MessageKind, NodeId
from .protocol import ProtocolRun, ShareGrant

# -- roles -----------------------------------------------------------------

ROLE_N1 = "N1"
ROLE_N2 = "N2"
ROLE_RECEIVER = "Receiver"
ROLE_OWNER = "Owner"

# Canonical role order; feasibility reports name the first missing link in
# this order.
ROLE_ORDER = (ROLE_N1, ROLE_N2, ROLE_RECEIVER, ROLE_OWNER)

#: The 7 non-empty coalitions of storage nodes and receiver, smallest first.
COALITIONS: tuple[tuple[str, ...], ...] = tuple(
    c
    for size in (1, 2, 3)
    for c in combinations((ROLE_N1, ROLE_N2, ROLE_RECEIVER), size)
)


# -- facts and rules -------------------------------------------------------

class Fact(str, Enum):
    """One atom of knowledge about a single shared file."""

    BLOB_ORIG = "HasBlobOrig"          # the ciphertext as first stored
    BLOB_SHARED = "HasBlobShared"      # the transformed ciphertext
    KEY_S = "HasKeyS"                  # the owner's file key
    KEY_S_PRIME = "HasKeySPrime"       # the receiver's file key
    RK = "HasRK"                       # the re-encryption rule
    LOC_N1 = "HasLocN1"                # where the original sits
    LOC_N2 = "HasLocN2"                # where the transformed copy sits
    PADS_OVER_D = "HasPadsOverD"       # the keystream pads on the masked blocks
    KNOWS_PLAIN = "KnowsPlain"         # the file contents


@dataclass(frozen=True)
class Rule:
    name: str
    premises: frozenset[Fact]
    conclusion: Fact
    note: str


def _rule(name: str, premises: Iterable[Fact], conclusion: Fact, note: str) -> Rule:
    return Rule(name, frozenset(premises), conclusion, note)


RULES: tuple[Rule, ...] = (
    _rule("R1", {Fact.BLOB_ORIG, Fact.KEY_S}, Fact.KNOWS_PLAIN,
          "the original blob decrypts under the owner key"),
    _rule("R2", {Fact.BLOB_SHARED, Fact.KEY_S_PRIME}, Fact.KNOWS_PLAIN,
          "the transformed blob decrypts under the receiver key"),
    _rule("R3", {Fact.BLOB_ORIG, Fact.RK}, Fact.BLOB_SHARED,
          "the re-encryption rule maps original to transformed"),
    _rule("R4", {Fact.BLOB_SHARED, Fact.RK}, Fact.BLOB_ORIG,
          "the rule is an XOR, so it also maps back"),
    _rule("R5", {Fact.LOC_N1}, Fact.BLOB_ORIG,
          "storage is open-fetch: knowing the location yields the blob"),
    _rule("R6", {Fact.LOC_N2}, Fact.BLOB_SHARED,
          "storage is open-fetch: knowing the location yields the blob"),
    _rule("R7", {Fact.BLOB_ORIG, Fact.BLOB_SHARED, Fact.KEY_S_PRIME}, Fact.PADS_OVER_D,
          "XOR of both blobs exposes the pads; the receiver key strips its half"),
    _rule("R8", {Fact.BLOB_ORIG, Fact.PADS_OVER_D}, Fact.KNOWS_PLAIN,
          "pads over the masked blocks unmask the original"),
)

# Nothing ever concludes the owner's key: it exists only as an initial fact.
assert all(rule.conclusion is not Fact.KEY_S for rule in RULES)


def closure(initial: Iterable[Fact], rules: Sequence[Rule] = RULES) -> frozenset[Fact]:
    """Least fixed point of ``rules`` over ``initial``."""
    facts = set(initial)
    changed = True
    while changed:
        changed = False
        for rule in rules:
            if rule.conclusion not in facts and rule.premises <= facts:
                facts.add(rule.conclusion)
                changed = True
    return frozenset(facts)


# -- initial facts, mined from the trace -----------------------------------

def role_initial_facts(run: ProtocolRun) -> dict[str, frozenset[Fact]]:
    """What the store+share machinery handed each role, read off the trace.

    Only standing deliveries count: the upload, the transformation request,
    the anonymous transfer and the safe-channel notice.  Fetch replies are
    deliberately ignored -- re-downloading is what rules R5/R6 model.
    """
    nodes = {
        ROLE_N1: run.n1,
        ROLE_N2: run.n2,
        ROLE_RECEIVER: run.receiver.node,
    }
    facts: dict[str, set[Fact]] = {role: set() for role in nodes}
    for entry in run.trace:
        for role, node in nodes.items():
            if entry.to != node:
                continue
            if (
                entry.kind == MessageKind.STORE_BLOB
                and entry.payload.get("blob_id") == run.file_id
            ):
                facts[role] |= {Fact.BLOB_ORIG, Fact.LOC_N1}
            elif (
                entry.kind == MessageKind.REENCRYPT_AND_FORWARD
                and entry.payload.get("blob_id") == run.file_id
            ):
                facts[role] |= {Fact.RK, Fact.LOC_N2}
            elif (
                entry.kind == MessageKind.TRANSFER_BLOB
                and entry.payload.get("store_as") == run.grant.shared_blob_id
            ):
                facts[role] |= {Fact.BLOB_SHARED, Fact.LOC_N2}
            elif entry.kind == MessageKind.SAFE_CHANNEL:
                grant = _open_grant(entry.payload.get("grant"), run, node)
                if grant is not None and grant.file_id == run.file_id:
                    facts[role] |= {Fact.KEY_S_PRIME, Fact.LOC_N2}
    out = {role: frozenset(f) for role, f in facts.items()}
    # The owner authored every secret in the run: both keys, the rule, both
    # locations, and the plaintext itself.
    out[ROLE_OWNER] = frozenset(Fact)
    return out


def _agent_private_keys(run: ProtocolRun) -> dict[NodeId, bytes]:
    return {
        run.owner.node: run.owner.keys.private,
        run.receiver.node: run.receiver.keys.private,
    }


def _open_grant(wrapped, run: ProtocolRun, node: NodeId) -> Optional[ShareGrant]:
    private = _agent_private_keys(run).get(node)
    if private is None or not isinstance(wrapped, bytes):
        return None
    try:
        return ShareGrant.from_bytes(envelope_unwrap(private, wrapped))
    except (EnvelopeError, ValueError):
        return None


# -- collusion matrix ------------------------------------------------------

@dataclass(frozen=True)
class CollusionReport:
    coalition: tuple[str, ...]
    file_id: bytes
    closure: frozenset[Fact]
    s_derivable: bool
    plain_derivable: bool


def collusion_matrix(run: ProtocolRun) -> list[CollusionReport]:
    """Closure report for each of the 7 coalitions over {N1, N2, Receiver}."""
    base = role_initial_facts(run)
    reports = []
    for coalition in COALITIONS:
        pooled: set[Fact] = set()
        for role in coalition:
            pooled |= base[role]
        closed = closure(pooled)
        reports.append(
            CollusionReport(
                coalition=coalition,
                file_id=run.file_id,
                closure=closed,
                s_derivable=Fact.KEY_S in closed,
                plain_derivable=Fact.KNOWS_PLAIN in closed,
            )
        )
    return reports


# -- feasibility -----------------------------------------------------------

@dataclass(frozen=True)
class FeasibilityReport:
    coalition: tuple[str, ...]
    feasible: bool
    missing_link: Optional[str] = None


def _known_node_ids(run: ProtocolRun, node: NodeId) -> set[NodeId]:
    """Every node id the given node has seen: visible senders and node-valued
    payload fields of its deliveries, its own correspondents, and -- if it can
    open a safe-channel notice -- the location named inside."""
    known = {node}
    for entry in run.trace:
        if entry.to == node:
            if entry.frm is not None:
                known.add(entry.frm)
            known.update(entry.node_refs)
            if entry.kind == MessageKind.SAFE_CHANNEL:
                grant = _open_grant(entry.payload.get("grant"), run, node)
                if grant is not None:
                    known.add(grant.share_location)
        elif entry.frm == node:
            known.add(entry.to)
            known.update(entry.node_refs)
    return known


def coalition_feasibility(
    run: ProtocolRun, coalition: Iterable[str]
) -> FeasibilityReport:
    """Can these parties even find each other?

    Feasible only if every member can identify every other member from its
    own deliveries; otherwise reports the first identification that fails.
    """
    members = tuple(sorted(set(coalition), key=ROLE_ORDER.index))
    nodes = {
        ROLE_N1: run.n1,
        ROLE_N2: run.n2,
        ROLE_RECEIVER: run.receiver.node,
        ROLE_OWNER: run.owner.node,
    }
    known = {role: _known_node_ids(run, nodes[role]) for role in members}
    for target in members:
        for source in members:
            if source == target:
                continue
            if nodes[target] not in known[source]:
                return FeasibilityReport(members, False, f"{target} location")
    return FeasibilityReport(members, True, None)


def attack_matrix_table(run: ProtocolRun) -> list[dict]:
    """The collusion matrix joined with feasibility, as JSON-ready rows."""
    rows = []
    for report in collusion_matrix(run):
        feas = coalition_feasibility(run, report.coalition)
        rows.append(
            {
                "coalition": list(report.coalition),
                "s_derivable": report.s_derivable,
                "plain_derivable": report.plain_derivable,
                "feasible": feas.feasible,
                "missing_link": feas.missing_link,
                "closure": sorted(fact.value for fact in report.closure),
            }
        )
    return rows


# -- trace secrecy checks --------------------------------------------------

def n1_identity_leaks(run: ProtocolRun) -> list[dict]:
    """Deliveries to the receiver or to N2 that expose N1's node id."""
    watched = {run.receiver.node, run.n2}
    leaks = []
    for entry in run.trace:
        if entry.to not in watched:
            continue
        if entry.frm == run.n1 or run.n1 in entry.node_refs:
            leaks.append({"seq": entry.seq, "kind": entry.kind.value, "to": entry.to})
    return leaks


def key_material_leaks(run: ProtocolRun, file_key: bytes) -> list[dict]:
    """Payload byte fields containing either file key outside its envelope.

    The owner key must appear nowhere at all.  The receiver key may travel
    only inside the wrapped safe-channel grant (where it is ciphertext, so a
    literal match would itself be a failure).
    """
    leaks = []
    for entry in run.trace:
        for field, value in entry.payload.items():
            if not isinstance(value, bytes):
                continue
            if file_key in value:
                leaks.append(
                    {"seq": entry.seq, "field": field, "key": "file_key"}
                )
            if run.grant.new_key in value:
                leaks.append(
                    {"seq": entry.seq, "field": field, "key": "share_key"}
                )
    return leaks


# -- ciphertext statistics -------------------------------------------------

MIN_SECTION = 64 * 1024


def ciphertext_uniformity(blob: Union[bytes, bytearray, FileCiphertext]) -> float:
    """Chi-square p-value of the byte histogram against uniform.

    Accepts a parsed ciphertext, a serialized one (the header is excluded;
    only the block section is tested), or a raw byte section.
    """
    if isinstance(blob, FileCiphertext):
        section = blob.blocks
    else:
        data = bytes(blob)
        section = FileCiphertext.from_bytes(data).blocks if data[:4] == MAGIC else data
    if len(section) < MIN_SECTION:
        raise SizeError(
            f"need at least {MIN_SECTION} bytes of block section, got {len(section)}"
        )
    return float(stats.chisquare(_kernels.byte_histogram(section)).pvalue)


# -- exhaustive key search at toy scale ------------------------------------

@dataclass(frozen=True)
class ToyCiphertext:
    """Counter-mode ciphertext of the scaled-down cipher: one-byte blocks,
    only the designated positions masked."""

    nonce: int
    dset: tuple[int, ...]
    blocks: bytes


@dataclass(frozen=True)
class ToyRekey:
    new_nonce: int
    pads: Mapping[int, int]


@dataclass(frozen=True)
class ToyInstance:
    """A complete scaled-down sharing episode for the search harness."""

    cipher: ToyCipher
    s: bytes
    s_prime: bytes
    c: ToyCiphertext
    c_shared: ToyCiphertext
    rk: ToyRekey


def toy_keystream(cipher: ToyCipher, key: bytes, nonce: int, index: int) -> int:
    return cipher.encrypt_block(key, bytes([(nonce + index) % 256]))[0]


def toy_encrypt(
    cipher: ToyCipher, key: bytes, pseudotext: bytes, dset: Sequence[int], nonce: int
) -> ToyCiphertext:
    out = bytearray(pseudotext)
    for i in dset:
        out[i - 1] ^= toy_keystream(cipher, key, nonce, i)
    return ToyCiphertext(nonce, tuple(sorted(dset)), bytes(out))


def toy_rekey(
    cipher: ToyCipher,
    old_key: bytes,
    old_nonce: int,
    new_key: bytes,
    new_nonce: int,
    dset: Sequence[int],
) -> ToyRekey:
    pads = {
        i: toy_keystream(cipher, old_key, old_nonce, i)
        ^ toy_keystream(cipher, new_key, new_nonce, i)
        for i in dset
    }
    return ToyRekey(new_nonce, pads)


def make_toy_instance(
    rng: Union[RandomSource, int, None] = None, *, seed: int = 0, length: int = 8
) -> ToyInstance:
    """Random pseudotext, random keys, the last position designated."""
    if isinstance(rng, int):
        rng = RandomSource(rng)
    rng = coerce_rng(rng)
    cipher = ToyCipher(seed)
    s = rng.bytes(2)
    s_prime = rng.bytes(2)
    nonce = rng.randrange(256)
    new_nonce = rng.randrange(256)
    pseudotext = rng.bytes(length)
    dset = (length,)
    c = toy_encrypt(cipher, s, pseudotext, dset, nonce)
    rk = toy_rekey(cipher, s, nonce, s_prime, new_nonce, dset)
    shared = bytearray(c.blocks)
    for i in dset:
        shared[i - 1] ^= rk.pads[i]
    c_shared = ToyCiphertext(new_nonce, dset, bytes(shared))
    return ToyInstance(cipher, s, s_prime, c, c_shared, rk)


def toy_key_search(
    c: ToyCiphertext,
    c_shared: ToyCiphertext,
    rk: ToyRekey,
    s_prime: bytes,
    *,
    cipher: ToyCipher,
) -> int:
    """Count keys consistent with everything a colluding pair holds.

    The pair knows both ciphertexts, the re-encryption rule and the new key,
    which fixes the old keystream byte at every designated position:
    ``ks(k, nonce, i) == pads[i] ^ ks(s_prime, new_nonce, i)``.  Every key
    whose keystream matches at all positions is indistinguishable from the
    real one.  A count above 1 is the point: the rule does not identify the
    old key.
    """
    if getattr(cipher, "key_size", None) != 2 or getattr(cipher, "block_size", None) != 1:
        raise ValueError(
            "exhaustive key search is only available for the scaled-down test "
            "cipher; the full-size key space is not searchable"
        )
    if c_shared.nonce != rk.new_nonce:
        raise ValueError("shared ciphertext does not carry the rule's nonce")
    if tuple(sorted(rk.pads)) != c.dset or c.dset != c_shared.dset:
        raise ValueError("rule and ciphertexts disagree on the designated positions")
    indices = c.dset
    inputs = bytes((c.nonce + i) % 256 for i in indices)
    targets = bytes(
        rk.pads[i] ^ toy_keystream(cipher, s_prime, rk.new_nonce, i) for i in indices
    )
    return _kernels.count_consistent_toy_keys(bytes(cipher.sbox), inputs, targets)
