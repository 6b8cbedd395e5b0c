"""Transaction DAG: vertex storage, tips, reachability and pruning.

Every vertex references two earlier vertices; following those references
yields the vertex's "cover set" (itself plus everything reachable in its
past).  Cover sets are the quantity every selection strategy and every
proposal policy maximises, so they are tracked incrementally as bitmasks
over the active vertex population.  The bitmask cache is an optimisation
only: correctness is defined by plain breadth-first traversal of the
parent references, which the test suite checks against.

A Dag instance is single-writer: reads may interleave freely between
writes, but all mutating calls on one instance must be totally ordered.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from heapq import heappop, heappush

from .errors import (
    CycleViolation,
    DuplicateCoverage,
    NotDownwardClosed,
    UnknownParent,
    UnknownTransaction,
    UnknownVertex,
)

HASH_BYTES = 32
SIGNATURE_BYTES = 65
PARENT_COUNT = 2
# Per-vertex wire overhead: one signature plus the two parent links.
VERTEX_OVERHEAD_BYTES = SIGNATURE_BYTES + PARENT_COUNT * HASH_BYTES
COMPACT_TX_BYTES = 6

GENESIS_ATTACHER = "genesis"


def _sha256(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(part)
    return h.digest()


def _be8(value: int) -> bytes:
    return value.to_bytes(8, "big")


def _be4(value: int) -> bytes:
    return value.to_bytes(4, "big")


@dataclass(frozen=True)
class Transaction:
    """A fee-bearing payload identified by its 32-byte hash."""

    tx_hash: bytes
    fee: int
    sender_id: str = ""

    def __post_init__(self) -> None:
        if len(self.tx_hash) != HASH_BYTES:
            raise ValueError(f"tx_hash must be {HASH_BYTES} bytes")
        if self.fee < 0:
            raise ValueError("fee must be non-negative")


@dataclass(frozen=True)
class Vertex:
    """An append-only DAG node carrying uncovered transaction hashes.

    The identity is the hash of the canonical encoding (parents in
    ascending order, round, attacher, transaction list), so two vertices
    with identical content share an id regardless of construction order.
    """

    parents: tuple[bytes, ...]
    attacher_id: str
    round: int
    tx_hashes: tuple[bytes, ...]
    signature: bytes
    vertex_id: bytes = field(init=False)

    def __post_init__(self) -> None:
        if self.parents and len(self.parents) != PARENT_COUNT:
            raise ValueError("a non-genesis vertex has exactly two parents")
        if self.round < 0:
            raise ValueError("round must be non-negative")
        if len(self.signature) != SIGNATURE_BYTES:
            raise ValueError(f"signature must be {SIGNATURE_BYTES} bytes")
        for h in self.parents:
            if len(h) != HASH_BYTES:
                raise ValueError("parent references must be 32-byte hashes")
        for h in self.tx_hashes:
            if len(h) != HASH_BYTES:
                raise ValueError("transaction references must be 32-byte hashes")
        object.__setattr__(self, "vertex_id", self._content_hash())

    def _content_hash(self) -> bytes:
        attacher = self.attacher_id.encode("utf-8")
        return _sha256(
            b"vertex",
            bytes([len(self.parents)]),
            *sorted(self.parents),
            _be8(self.round),
            _be4(len(attacher)),
            attacher,
            _be4(len(self.tx_hashes)),
            *self.tx_hashes,
        )


def vertex_signature(attacher_id: str, round_no: int) -> bytes:
    """Deterministic 65-byte stand-in for a recoverable signature."""
    attacher = attacher_id.encode("utf-8")
    a = _sha256(b"vertex-sig-a", _be4(len(attacher)), attacher, _be8(round_no))
    b = _sha256(b"vertex-sig-b", _be4(len(attacher)), attacher, _be8(round_no))
    return a + b + b"\x01"


def make_vertex(
    parents: tuple[bytes, bytes],
    attacher_id: str,
    round_no: int,
    tx_hashes: tuple[bytes, ...] = (),
) -> Vertex:
    """Build a vertex with canonical parent order and a placeholder signature."""
    return Vertex(
        parents=tuple(sorted(parents)),
        attacher_id=attacher_id,
        round=round_no,
        tx_hashes=tuple(tx_hashes),
        signature=vertex_signature(attacher_id, round_no),
    )


def genesis_vertex() -> Vertex:
    return Vertex(
        parents=(),
        attacher_id=GENESIS_ATTACHER,
        round=0,
        tx_hashes=(),
        signature=b"\x00" * SIGNATURE_BYTES,
    )


class Dag:
    """The active transaction DAG plus boundary markers for pruned history.

    Vertices removed by :meth:`prune_finalized` leave a marker (id and
    round) behind, so surviving vertices keep valid parent references and
    new vertices may still attach to the settled frontier.  Markers count
    as zero everywhere: cover sets, cardinalities and transaction
    orderings see active vertices only.
    """

    def __init__(self) -> None:
        self.vertices: dict[bytes, Vertex] = {}
        self.boundary: dict[bytes, int] = {}
        self.tip_set: set[bytes] = set()
        self._stale: set[bytes] = set()
        self._index: dict[bytes, int] = {}
        self._ids: list[bytes] = []
        self._mask: dict[bytes, int] = {}
        self._tx_mask: dict[bytes, int] = {}
        genesis = genesis_vertex()
        self.genesis_id = genesis.vertex_id
        self._store(genesis, parents_mask=0)

    # --- internal bookkeeping ---

    def _store(self, vertex: Vertex, parents_mask: int) -> None:
        vid = vertex.vertex_id
        bit = len(self._ids)
        self.vertices[vid] = vertex
        self._index[vid] = bit
        self._ids.append(vid)
        self._mask[vid] = (1 << bit) | parents_mask
        for txh in vertex.tx_hashes:
            self._tx_mask[txh] = self._tx_mask.get(txh, 0) | (1 << bit)
        for parent in vertex.parents:
            self.tip_set.discard(parent)
            self._stale.discard(parent)
        self.tip_set.add(vid)

    def _roots_mask(self, roots) -> int:
        mask = 0
        for vid in roots:
            cached = self._mask.get(vid)
            if cached is not None:
                mask |= cached
            elif vid not in self.boundary:
                raise UnknownVertex(f"unknown vertex {vid.hex()}")
        return mask

    def _decode_mask(self, mask: int) -> set[bytes]:
        out = set()
        while mask:
            low = mask & -mask
            out.add(self._ids[low.bit_length() - 1])
            mask ^= low
        return out

    # --- queries ---

    @property
    def active_count(self) -> int:
        return len(self.vertices)

    def round_of(self, vertex_id: bytes) -> int:
        vertex = self.vertices.get(vertex_id)
        if vertex is not None:
            return vertex.round
        if vertex_id in self.boundary:
            return self.boundary[vertex_id]
        raise UnknownVertex(f"unknown vertex {vertex_id.hex()}")

    def is_stale(self, vertex_id: bytes) -> bool:
        return vertex_id in self._stale

    def tips(self, eligible_only: bool = False) -> list[bytes]:
        """Active vertices with no in-coming edge, ascending by id."""
        if eligible_only:
            return sorted(self.tip_set - self._stale)
        return sorted(self.tip_set)

    def eligible_tips(self) -> list[bytes]:
        return self.tips(eligible_only=True)

    def cover_mask(self, roots) -> int:
        """Bitmask form of :meth:`cover_set` (positions into active ids)."""
        return self._roots_mask(roots)

    def cover_set(self, roots) -> set[bytes]:
        """Each root plus everything reachable through parent references,
        restricted to active vertices."""
        return self._decode_mask(self._roots_mask(roots))

    def cover_cardinality(self, roots) -> int:
        return self._roots_mask(roots).bit_count()

    def vertices_containing(self, tx_hash: bytes) -> list[bytes]:
        """Active vertices listing the transaction, ascending by id."""
        mask = self._tx_mask.get(tx_hash, 0)
        if not mask:
            raise UnknownTransaction(f"transaction {tx_hash.hex()} not in any active vertex")
        return sorted(self._decode_mask(mask))

    def covered_transactions(self, roots) -> set[bytes]:
        """All transaction hashes contained in the cover set of ``roots``."""
        mask = self._roots_mask(roots)
        found = set()
        for vid in self._decode_mask(mask):
            found.update(self.vertices[vid].tx_hashes)
        return found

    def transaction_in_mask(self, tx_hash: bytes, cover_mask: int) -> bool:
        """Whether any vertex in the bitmask region lists the transaction."""
        return bool(self._tx_mask.get(tx_hash, 0) & cover_mask)

    def own_bit(self, vertex_id: bytes) -> int | None:
        """Single-bit mask for one active vertex, or None if not active."""
        index = self._index.get(vertex_id)
        return None if index is None else 1 << index

    # --- mutation ---

    def attach(self, vertex: Vertex) -> bytes:
        """Append one vertex; returns its content hash.

        Parents must exist (active or boundary marker), the vertex's round
        may not precede a parent's, and its transaction list must be
        disjoint from everything its parents already cover.
        """
        vid = vertex.vertex_id
        if vid in self.vertices or vid in self.boundary:
            raise ValueError(f"vertex {vid.hex()} already attached")
        if not vertex.parents:
            raise UnknownParent("only the genesis vertex may have zero parents")
        parents_mask = 0
        for parent in vertex.parents:
            if parent in self.vertices:
                parent_round = self.vertices[parent].round
                parents_mask |= self._mask[parent]
            elif parent in self.boundary:
                parent_round = self.boundary[parent]
            else:
                raise UnknownParent(f"unknown parent {parent.hex()}")
            if vertex.round < parent_round:
                raise CycleViolation(
                    f"vertex round {vertex.round} precedes parent round {parent_round}"
                )
        seen: set[bytes] = set()
        for txh in vertex.tx_hashes:
            if txh in seen or self._tx_mask.get(txh, 0) & parents_mask:
                raise DuplicateCoverage(f"transaction {txh.hex()} already covered")
            seen.add(txh)
        self._store(vertex, parents_mask)
        return vid

    def discard_stale_tips(self, current_round: int, max_age: int) -> int:
        """Flag tips older than ``max_age`` rounds as ineligible.

        Returns the number of tips newly flagged.  Flagged tips stay in
        the graph for auditing; they are only excluded from parent
        selection and proposal coverage.
        """
        if max_age < 1:
            raise ValueError("max_age must be >= 1")
        newly = 0
        for vid in sorted(self.tip_set - self._stale):
            if current_round - self.vertices[vid].round > max_age:
                self._stale.add(vid)
                newly += 1
        return newly

    def unreachable_transactions(self) -> list[bytes]:
        """Transactions whose every active occurrence sits outside the
        cover of all eligible tips (i.e. stranded under stale tips)."""
        eligible_mask = 0
        for vid in self.tip_set - self._stale:
            eligible_mask |= self._mask[vid]
        stranded = [
            txh
            for txh, mask in self._tx_mask.items()
            if mask and not mask & eligible_mask
        ]
        return sorted(stranded)

    def prune_finalized(self, finalized_cover) -> "Dag":
        """Drop a downward-closed set of active vertices, leaving markers.

        The reachability cache is rebuilt over the survivors; edges into
        the pruned region count as zero from here on.
        """
        cover = set(finalized_cover)
        for vid in cover:
            vertex = self.vertices.get(vid)
            if vertex is None:
                raise UnknownVertex(f"cannot prune unknown vertex {vid.hex()}")
            for parent in vertex.parents:
                if parent in self.vertices and parent not in cover:
                    raise NotDownwardClosed(
                        f"pruning {vid.hex()} would orphan parent {parent.hex()}"
                    )
        if not cover:
            return self
        for vid in cover:
            self.boundary[vid] = self.vertices[vid].round
            del self.vertices[vid]
            self.tip_set.discard(vid)
            self._stale.discard(vid)
        # Rebuild the dense bit indices over the survivors.  Insertion
        # order of self.vertices is topological, so one pass suffices.
        self._index = {}
        self._ids = []
        self._mask = {}
        self._tx_mask = {}
        for vid, vertex in self.vertices.items():
            bit = len(self._ids)
            self._index[vid] = bit
            self._ids.append(vid)
            mask = 1 << bit
            for parent in vertex.parents:
                mask |= self._mask.get(parent, 0)
            self._mask[vid] = mask
            for txh in vertex.tx_hashes:
                self._tx_mask[txh] = self._tx_mask.get(txh, 0) | (1 << bit)
        return self

    def ordered_transactions(self, roots) -> list[bytes]:
        """Canonical transaction order over the cover set of ``roots``.

        Vertices are emitted topologically (past first, ties by ascending
        vertex id); within a vertex the attacher's listed order is kept.
        A transaction duplicated across sibling branches appears once, at
        its first position in this order.
        """
        cover = self.cover_set(roots)
        pending: dict[bytes, int] = {}
        dependants: dict[bytes, list[bytes]] = {}
        ready: list[bytes] = []
        for vid in cover:
            count = 0
            for parent in self.vertices[vid].parents:
                if parent in cover:
                    count += 1
                    dependants.setdefault(parent, []).append(vid)
            pending[vid] = count
            if count == 0:
                heappush(ready, vid)
        out: list[bytes] = []
        emitted = set()
        while ready:
            vid = heappop(ready)
            for txh in self.vertices[vid].tx_hashes:
                if txh not in emitted:
                    emitted.add(txh)
                    out.append(txh)
            for child in dependants.get(vid, ()):
                pending[child] -= 1
                if pending[child] == 0:
                    heappush(ready, child)
        return out
