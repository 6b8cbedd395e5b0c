"""Round protocol: beacon, role election, proposals, notarization, finality.

Each round a hash-chain beacon value deterministically ranks the staker
registry into proposers, draws the attacher set and the notarization
committee.  At the end of the round the highest-ranked proposers publish
tip sets; the committee notarizes one winner, which becomes final two
rounds later.  Real threshold cryptography is out of scope: the beacon is
a seeded hash chain and signatures are fixed-size placeholders, sized to
match the wire-format accounting.

The engine advances one round at a time on a single logical timeline.
Proposal construction for distinct proposers is side-effect free over a
read-only DAG snapshot, so it may be evaluated concurrently as long as
results are merged in ranking order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .dag import HASH_BYTES, SIGNATURE_BYTES, Dag
from .errors import (
    EmptyDag,
    ForkDetected,
    InsufficientStakers,
    NoProposals,
    NoQuorum,
    UncoverableTargets,
)

ZERO_HASH = b"\x00" * HASH_BYTES
FINALITY_LAG = 2


def _sha256(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(part)
    return h.digest()


def _be8(value: int) -> bytes:
    return value.to_bytes(8, "big")


def next_seed(prev_seed: bytes, round_no: int) -> bytes:
    """Advance the beacon: hash of the previous value and the round number."""
    if len(prev_seed) != HASH_BYTES:
        raise ValueError(f"seed must be {HASH_BYTES} bytes")
    return _sha256(prev_seed, _be8(round_no))


def merkle_root(tx_hashes) -> bytes:
    """Binary Merkle root over the leaves in the given order.

    An odd level duplicates its last node; a single leaf is its own root;
    the empty list maps to 32 zero bytes.
    """
    level = list(tx_hashes)
    if not level:
        return ZERO_HASH
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [_sha256(level[i], level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def compute_block_hash(prev_block_hash: bytes, root: bytes, round_no: int) -> bytes:
    return _sha256(prev_block_hash, root, _be8(round_no))


@dataclass(frozen=True)
class RoundContext:
    """Per-round role assignment derived from the beacon value."""

    round: int
    seed: bytes
    attachers: tuple[str, ...]
    proposer_ranking: tuple[str, ...]
    committee: tuple[str, ...]


def draw_roles(
    seed: bytes,
    stakers,
    n_attachers: int,
    committee_size: int,
    round_no: int = 0,
) -> RoundContext:
    """Rank stakers and draw the attacher set and committee for a round.

    Each role uses an independent, domain-separated sort key over the
    beacon value, so one identity's proposer rank says nothing about its
    attacher or committee membership.  Every identity carries equal
    weight.
    """
    registry = list(stakers)
    if not registry:
        raise InsufficientStakers("empty staker registry")
    if n_attachers > len(registry):
        raise InsufficientStakers(
            f"{n_attachers} attachers requested from {len(registry)} stakers"
        )
    if committee_size > len(registry):
        raise InsufficientStakers(
            f"committee of {committee_size} requested from {len(registry)} stakers"
        )

    def sort_key(domain: bytes):
        return lambda node: _sha256(seed, domain, node.encode("utf-8"))

    ranking = tuple(sorted(registry, key=sort_key(b"propose")))
    attachers = tuple(sorted(registry, key=sort_key(b"attach"))[:n_attachers])
    committee = tuple(sorted(registry, key=sort_key(b"notarize"))[:committee_size])
    return RoundContext(
        round=round_no,
        seed=seed,
        attachers=attachers,
        proposer_ranking=ranking,
        committee=committee,
    )


def greedy_min_cover(dag: Dag, targets, pool=None) -> list[bytes]:
    """Smallest-effort tip set covering all target vertices.

    Classic greedy set cover: repeatedly take the candidate tip covering
    the most still-uncovered targets (ties by ascending id).  ``pool``
    restricts the candidate tips; it defaults to all eligible tips.
    """
    tips = list(pool) if pool is not None else dag.eligible_tips()
    uncovered = 0
    for vid in sorted(set(targets)):
        bit = dag.own_bit(vid)
        if bit is None:
            raise UncoverableTargets(f"target {vid.hex()} is not active")
        uncovered |= bit
    chosen: list[bytes] = []
    masks = {t: dag.cover_mask((t,)) for t in tips}
    while uncovered:
        best_tip = None
        best_gain = 0
        for tip in sorted(masks):
            gain = (masks[tip] & uncovered).bit_count()
            if gain > best_gain:
                best_gain = gain
                best_tip = tip
        if best_tip is None:
            raise UncoverableTargets(
                f"{uncovered.bit_count()} target(s) not coverable by the candidate tips"
            )
        chosen.append(best_tip)
        uncovered &= ~masks[best_tip]
        del masks[best_tip]
    return chosen


@dataclass(frozen=True)
class CoveragePolicy:
    """How a proposer chooses its tip set.

    ``max_coverage`` covers every active vertex; ``targets`` covers an
    explicit vertex set; ``censor`` covers as much as possible while
    avoiding every vertex that contains a given transaction; ``empty``
    proposes nothing.
    """

    mode: str = "max_coverage"
    targets: tuple[bytes, ...] | None = None
    censor_tx: bytes | None = None

    @classmethod
    def cover_targets(cls, targets) -> "CoveragePolicy":
        return cls(mode="targets", targets=tuple(sorted(targets)))

    @classmethod
    def censoring(cls, tx_hash: bytes) -> "CoveragePolicy":
        return cls(mode="censor", censor_tx=tx_hash)

    @classmethod
    def empty(cls) -> "CoveragePolicy":
        return cls(mode="empty")


@dataclass(frozen=True)
class Proposal:
    proposer_id: str
    rank_index: int
    tip_set: tuple[bytes, ...]
    prev_block_hash: bytes
    merkle_root: bytes
    signature: bytes

    def proposal_hash(self) -> bytes:
        proposer = self.proposer_id.encode("utf-8")
        return _sha256(
            b"proposal",
            _be8(self.rank_index),
            _be8(len(proposer)),
            proposer,
            _be8(len(self.tip_set)),
            *self.tip_set,
            self.prev_block_hash,
            self.merkle_root,
        )


def _proposal_signature(proposer_id: str, round_no: int) -> bytes:
    proposer = proposer_id.encode("utf-8")
    a = _sha256(b"proposal-sig-a", _be8(len(proposer)), proposer, _be8(round_no))
    b = _sha256(b"proposal-sig-b", _be8(len(proposer)), proposer, _be8(round_no))
    return (a + b + b"\x01")[:SIGNATURE_BYTES]


def censoring_tip_pool(dag: Dag, tx_hash: bytes) -> list[bytes]:
    """Eligible tips whose cover avoids every vertex listing ``tx_hash``."""
    forbidden = 0
    for vid in dag.vertices_containing(tx_hash):
        forbidden |= dag.own_bit(vid)
    return [t for t in dag.eligible_tips() if not dag.cover_mask((t,)) & forbidden]


def make_proposal(
    dag: Dag,
    ctx: RoundContext,
    proposer_id: str,
    prev_block_hash: bytes,
    policy: CoveragePolicy = CoveragePolicy(),
    max_block_txs: int | None = None,
) -> Proposal:
    """Build and placeholder-sign one proposer's tip set for the round.

    The Merkle root commits to the canonical transaction order of the tip
    set, truncated to ``max_block_txs`` when a block cap applies.
    """
    if proposer_id not in ctx.proposer_ranking:
        raise ValueError(f"{proposer_id!r} is not in this round's ranking")
    if dag.active_count == 0:
        raise EmptyDag("cannot propose over an empty DAG")

    if policy.mode == "empty":
        tips: list[bytes] = []
    elif policy.mode == "targets":
        tips = greedy_min_cover(dag, policy.targets or ())
    elif policy.mode == "censor":
        pool = censoring_tip_pool(dag, policy.censor_tx)
        reachable = dag.cover_set(pool) - {dag.genesis_id}
        tips = greedy_min_cover(dag, reachable, pool=pool)
    elif policy.mode == "max_coverage":
        # stale-tip subgraphs are excluded from proposal coverage, so the
        # honest maximum is everything reachable from the eligible tips
        pool = dag.eligible_tips()
        targets = dag.cover_set(pool) - {dag.genesis_id}
        tips = greedy_min_cover(dag, targets, pool=pool)
    else:
        raise ValueError(f"unknown coverage policy {policy.mode!r}")

    txs = dag.ordered_transactions(tips)
    if max_block_txs is not None:
        txs = txs[:max_block_txs]
    return Proposal(
        proposer_id=proposer_id,
        rank_index=ctx.proposer_ranking.index(proposer_id),
        tip_set=tuple(sorted(tips)),
        prev_block_hash=prev_block_hash,
        merkle_root=merkle_root(txs),
        signature=_proposal_signature(proposer_id, ctx.round),
    )


@dataclass(frozen=True)
class NotarizedBlock:
    round: int
    proposal: Proposal
    notarization_signers: tuple[str, ...]
    block_hash: bytes
    tx_list: tuple[bytes, ...] = ()
    carried_over: tuple[bytes, ...] = ()


def notarize_round(
    proposals,
    ctx: RoundContext,
    mode: str = "rank",
    lam: Fraction = Fraction(1, 2),
    dag: Dag | None = None,
    honest_signers=None,
) -> NotarizedBlock:
    """Select the round winner and record the committee notarization.

    ``rank`` mode takes the best (lowest) proposer rank.  ``competitive``
    mode scores each proposal as coverage ratio minus ``lam`` times the
    normalised rank, rewarding proposals that span more of the DAG; it
    needs the dag to measure coverage.  The simulation is honest-majority:
    every honest committee member signs the single winner.
    """
    proposals = list(proposals)
    if not proposals:
        raise NoProposals("no proposals to notarize")
    seen_proposers = [p.proposer_id for p in proposals]
    if len(set(seen_proposers)) != len(seen_proposers):
        raise ValueError("each proposer may submit at most one proposal")

    signers = tuple(honest_signers) if honest_signers is not None else ctx.committee
    if len(signers) * 2 <= len(ctx.committee):
        raise NoQuorum(
            f"{len(signers)} honest signer(s) cannot reach a majority of {len(ctx.committee)}"
        )

    if mode == "rank":
        winner = min(proposals, key=lambda p: p.rank_index)
    elif mode == "competitive":
        if dag is None:
            raise ValueError("competitive notarization needs the dag to score coverage")
        n_vertices = max(len(ctx.attachers), 1)
        n_stakers = len(ctx.proposer_ranking)

        def score(p: Proposal) -> Fraction:
            covered = dag.cover_set(p.tip_set) - {dag.genesis_id}
            return Fraction(len(covered), n_vertices) - lam * Fraction(p.rank_index, n_stakers)

        winner = min(
            proposals,
            key=lambda p: (-score(p), p.rank_index, p.proposal_hash()),
        )
    else:
        raise ValueError(f"unknown notarization mode {mode!r}")

    return NotarizedBlock(
        round=ctx.round,
        proposal=winner,
        notarization_signers=signers,
        block_hash=compute_block_hash(winner.prev_block_hash, winner.merkle_root, ctx.round),
    )


@dataclass
class ChainState:
    """One notarized block per round plus the finalized frontier."""

    blocks: dict[int, NotarizedBlock] = field(default_factory=dict)
    finalized_height: int = -1

    def add(self, block: NotarizedBlock) -> None:
        if block.round in self.blocks:
            raise ForkDetected(f"two notarized blocks in round {block.round}")
        self.blocks[block.round] = block

    def replace_block(self, block: NotarizedBlock) -> None:
        """Swap in the assembled form of an already-notarized block."""
        self.blocks[block.round] = block

    def head(self) -> NotarizedBlock | None:
        if not self.blocks:
            return None
        return self.blocks[max(self.blocks)]


def finalize(chain: ChainState, current_round: int) -> list[NotarizedBlock]:
    """Finalize every notarized ancestor at least two rounds deep.

    Returns the newly finalized blocks, oldest first.  Idempotent; a
    linkage break (a block whose previous-hash does not match its
    predecessor) halts the simulation.
    """
    newly: list[NotarizedBlock] = []
    r = chain.finalized_height + 1
    while r <= current_round - FINALITY_LAG and r in chain.blocks:
        block = chain.blocks[r]
        if r - 1 in chain.blocks:
            prev = chain.blocks[r - 1]
            if block.proposal.prev_block_hash != prev.block_hash:
                raise ForkDetected(f"chain linkage broken at round {r}")
        newly.append(block)
        chain.finalized_height = r
        r += 1
    return newly


def assemble_block(
    dag: Dag,
    winner: Proposal,
    max_block_txs: int | None = None,
) -> tuple[tuple[bytes, ...], tuple[bytes, ...]]:
    """Expand the winning tip set into the block's transaction list.

    Returns ``(tx_list, carried_over)``: the canonical order truncated at
    the block cap, and the truncated remainder to re-queue for later
    rounds.  Pruning the covered vertex set afterwards is the caller's
    job.
    """
    txs = dag.ordered_transactions(winner.tip_set)
    if max_block_txs is None:
        return tuple(txs), ()
    return tuple(txs[:max_block_txs]), tuple(txs[max_block_txs:])


def finalized_with_assembly(block: NotarizedBlock, tx_list, carried_over) -> NotarizedBlock:
    return replace(block, tx_list=tuple(tx_list), carried_over=tuple(carried_over))
