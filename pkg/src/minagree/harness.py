"""Deterministic round orchestration and the desk-scale experiments.

One simulation executes a fixed number of block rounds on a single
logical timeline: beacon advance, role draw, mempool injection,
attachments, proposals, notarization, finalization two rounds back,
block assembly, pruning and stale-tip discard.  Everything is derived
from the configured seed; no wall clock or OS entropy enters anywhere,
so identical configs give byte-identical reports.

Attachment visibility model: attachers take their one slot per round in
a seeded random order.  A vertex placed in slot j reaches the attacher
in slot i with an independent per-link gossip delay uniform over the
visibility horizon (default: one full round of slots), so each attacher
works against its own partial snapshot of the round.  Everything from
earlier rounds is public, unless the cross-round delay model holds a
vertex back for whole rounds.  The horizon and delay knobs exist for
sensitivity runs around these defaults.
"""

from __future__ import annotations

import hashlib
import random
import statistics
import time
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction

from .attachment import AttachmentStrategy, build_vertex, select_parents
from .dag import (
    COMPACT_TX_BYTES,
    HASH_BYTES,
    VERTEX_OVERHEAD_BYTES,
    Dag,
    Transaction,
    make_vertex,
)
from .errors import ConfigInvalid
from .incentives import (
    LedgerAccounts,
    RewardPolicy,
    RoundEconomics,
    RoundParams,
    censorship_cost,
    distribute_rewards,
)
from .rounds import (
    ZERO_HASH,
    ChainState,
    CoveragePolicy,
    assemble_block,
    draw_roles,
    finalize,
    finalized_with_assembly,
    make_proposal,
    next_seed,
    notarize_round,
)

FEE_GEOMETRIC_P = 0.125
FEE_CAP = 64


def _sha256(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(part)
    return h.digest()


def _be8(value: int) -> bytes:
    return value.to_bytes(8, "big")


def _geometric_fee(rng: random.Random) -> int:
    """Seeded geometric fee in whole token units (mean 1/p, capped)."""
    fee = 1
    while fee < FEE_CAP and rng.random() >= FEE_GEOMETRIC_P:
        fee += 1
    return fee


@dataclass(frozen=True)
class DelayModel:
    """Extra whole-round visibility delay applied per vertex.

    ``none`` keeps only the intra-round gossip model; ``fixed`` hides
    each vertex for exactly ``rounds`` full rounds (1 = strictly
    synchronous rounds); ``uniform`` draws the delay uniformly from
    0..rounds per vertex.
    """

    kind: str = "none"
    rounds: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("none", "fixed", "uniform"):
            raise ConfigInvalid(f"unknown delay model {self.kind!r}")
        if self.kind == "none" and self.rounds:
            raise ConfigInvalid("delay model 'none' takes no round count")
        if self.kind != "none" and self.rounds < 1:
            raise ConfigInvalid(f"delay model {self.kind!r} needs rounds >= 1")

    def draw(self, rng: random.Random) -> int:
        if self.kind == "fixed":
            return self.rounds
        if self.kind == "uniform":
            return rng.randint(0, self.rounds)
        return 0

    def label(self) -> str:
        return self.kind if self.kind == "none" else f"{self.kind}:{self.rounds}"

    @classmethod
    def parse(cls, text: str) -> "DelayModel":
        text = text.strip().lower()
        if text == "none":
            return cls()
        kind, sep, count = text.partition(":")
        if not sep:
            raise ConfigInvalid(f"expected 'none', 'fixed:<rounds>' or 'uniform:<rounds>', got {text!r}")
        try:
            return cls(kind=kind, rounds=int(count))
        except ValueError as exc:
            raise ConfigInvalid(f"bad delay round count in {text!r}") from exc


@dataclass(frozen=True)
class SimConfig:
    seed: int
    n_stakers: int
    n_attachers: int
    committee_size: int = 1
    n_proposers: int = 3
    strategy: AttachmentStrategy = AttachmentStrategy("random")
    n_blocks: int = 100
    tip_discard_age: int = 10
    mempool_rate: int = 8
    delay_model: DelayModel = DelayModel()
    reward_policy: RewardPolicy = RewardPolicy()
    max_block_txs: int | None = None
    visibility_horizon: float = 1.0
    carryover_retry_limit: int | None = None

    def validate(self) -> None:
        counts = {
            "n_stakers": self.n_stakers,
            "n_attachers": self.n_attachers,
            "committee_size": self.committee_size,
            "n_proposers": self.n_proposers,
            "n_blocks": self.n_blocks,
            "tip_discard_age": self.tip_discard_age,
        }
        for name, value in counts.items():
            if value < 1:
                raise ConfigInvalid(f"{name} must be >= 1, got {value}")
        if self.mempool_rate < 0:
            raise ConfigInvalid("mempool_rate must be >= 0")
        if self.n_attachers > self.n_stakers:
            raise ConfigInvalid("n_attachers cannot exceed n_stakers")
        if self.committee_size > self.n_stakers:
            raise ConfigInvalid("committee_size cannot exceed n_stakers")
        if self.max_block_txs is not None and self.max_block_txs < 0:
            raise ConfigInvalid("max_block_txs must be >= 0 when set")
        if self.visibility_horizon < 0:
            raise ConfigInvalid("visibility_horizon must be >= 0")
        if self.carryover_retry_limit is not None and self.carryover_retry_limit < 0:
            raise ConfigInvalid("carryover_retry_limit must be >= 0 when set")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_stakers": self.n_stakers,
            "n_attachers": self.n_attachers,
            "committee_size": self.committee_size,
            "n_proposers": self.n_proposers,
            "strategy": {
                "kind": self.strategy.kind,
                "metropolis_threshold": self.strategy.metropolis_threshold,
                "metropolis_max_iters": self.strategy.metropolis_max_iters,
            },
            "n_blocks": self.n_blocks,
            "tip_discard_age": self.tip_discard_age,
            "mempool_rate": self.mempool_rate,
            "delay_model": self.delay_model.label(),
            "reward_policy": {
                "base_block_reward": self.reward_policy.base_block_reward,
                "non_producer_share": str(self.reward_policy.non_producer_share),
                "decouple_window": self.reward_policy.decouple_window,
                "hard_alpha": str(self.reward_policy.hard_alpha),
                "competitive_lambda": str(self.reward_policy.competitive_lambda),
                "committee_share": str(self.reward_policy.committee_share),
            },
            "max_block_txs": self.max_block_txs,
            "visibility_horizon": self.visibility_horizon,
            "carryover_retry_limit": self.carryover_retry_limit,
        }


@dataclass(frozen=True)
class RoundRecord:
    round: int
    proposal_size: int
    delta: Fraction
    fees: int
    coverage: int
    carried_over: int

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "proposal_size": self.proposal_size,
            "delta": float(self.delta),
            "fees": self.fees,
            "coverage": self.coverage,
            "carried_over": self.carried_over,
        }


@dataclass
class SimulationReport:
    config: dict
    rows: list[RoundRecord]
    aggregates: dict
    wall_time_s: float = 0.0
    chain: ChainState | None = field(default=None, repr=False, compare=False)

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "config": self.config,
            "rows": [row.to_dict() for row in self.rows],
            "aggregates": self.aggregates,
        }
        if include_timing:
            out["wall_time_s"] = self.wall_time_s
        return out


class _Frontier:
    """Publicly unreferenced vertices (active or already settled).

    Keeps the attachable frontier in ascending id order.  Applying a
    vertex publication removes its parents (now referenced) and adds the
    vertex itself.
    """

    def __init__(self, genesis_id: bytes) -> None:
        self.ids: list[bytes] = [genesis_id]

    def apply(self, vertex_id: bytes, parents) -> None:
        index = bisect_left(self.ids, vertex_id)
        if index >= len(self.ids) or self.ids[index] != vertex_id:
            self.ids.insert(index, vertex_id)
        for parent in set(parents):
            index = bisect_left(self.ids, parent)
            if index < len(self.ids) and self.ids[index] == parent:
                self.ids.pop(index)

    def drop(self, vertex_id: bytes) -> None:
        index = bisect_left(self.ids, vertex_id)
        if index < len(self.ids) and self.ids[index] == vertex_id:
            self.ids.pop(index)


def run_simulation(config: SimConfig) -> SimulationReport:
    """Execute the configured number of rounds and report per-round metrics.

    Each round's winning proposal targets every still-active vertex
    appended in the previous round; its cover is pruned as soon as the
    block is assembled, so consecutive blocks never overlap.  The
    reported coverage ratio is covered targets over targets (vacuously 1
    in the bootstrap round).
    """
    config.validate()
    started = time.perf_counter()

    dag = Dag()
    chain = ChainState()
    rng = random.Random(config.seed)
    stakers = tuple(f"node-{i:05d}" for i in range(config.n_stakers))
    seed = ZERO_HASH
    prev_hash = ZERO_HASH

    all_txs: dict[bytes, Transaction] = {}
    mempool: dict[bytes, Transaction] = {}
    requeues: dict[bytes, int] = {}
    settled: set[bytes] = set()
    dropped: set[bytes] = set()
    tx_counter = 0

    frontier = _Frontier(dag.genesis_id)
    arrivals: dict[int, list[tuple[bytes, tuple[bytes, ...]]]] = {}
    appended_prev: list[bytes] = []
    rows: list[RoundRecord] = []
    history: list[RoundEconomics] = []
    horizon = max(1, round(config.visibility_horizon * config.n_attachers))

    for r in range(config.n_blocks):
        seed = next_seed(seed, r)
        ctx = draw_roles(seed, stakers, config.n_attachers, config.committee_size, round_no=r)

        for _ in range(config.mempool_rate):
            tx_counter += 1
            tx = Transaction(
                tx_hash=_sha256(b"tx", seed, _be8(tx_counter)),
                fee=_geometric_fee(rng),
                sender_id=f"user-{tx_counter:06d}",
            )
            all_txs[tx.tx_hash] = tx
            mempool[tx.tx_hash] = tx

        # vertices whose cross-round delay elapsed become public now
        for vid, parents in arrivals.pop(r, ()):
            frontier.apply(vid, parents)

        base_pool = [v for v in frontier.ids if v in dag.vertices]
        if not base_pool:
            base_pool = list(frontier.ids)  # settled frontier keeps the chain alive
        mempool_list = list(mempool.values())
        order = list(ctx.attachers)
        rng.shuffle(order)

        published: list[tuple[int, bytes, tuple[bytes, ...]]] = []
        appended: list[bytes] = []
        for i, attacher in enumerate(order):
            removed: set[bytes] = set()
            adds: list[bytes] = []
            for slot, vid, parents in published:
                age = i - slot
                if age >= horizon or rng.random() < age / horizon:
                    adds.append(vid)
                    removed.add(parents[0])
                    removed.add(parents[-1])
            pool = [t for t in base_pool if t not in removed]
            pool += [v for v in adds if v not in removed]
            parents = select_parents(
                dag, config.strategy, rng, tips=pool, active_count=dag.active_count
            )
            vertex = build_vertex(dag, attacher, mempool_list, parents, r)
            dag.attach(vertex)
            appended.append(vertex.vertex_id)
            delay = config.delay_model.draw(rng)
            if delay == 0:
                published.append((i, vertex.vertex_id, vertex.parents))
            else:
                arrivals.setdefault(r + delay, []).append((vertex.vertex_id, vertex.parents))

        # proposals target the previous round's still-active vertices
        targets = [vid for vid in appended_prev if vid in dag.vertices]
        policy = CoveragePolicy.cover_targets(targets)
        proposers = ctx.proposer_ranking[: config.n_proposers]
        proposals = [
            make_proposal(dag, ctx, proposer, prev_hash, policy, config.max_block_txs)
            for proposer in proposers
        ]
        block = notarize_round(
            proposals, ctx, mode="rank", lam=config.reward_policy.competitive_lambda, dag=dag
        )
        chain.add(block)
        tx_list, carried = assemble_block(dag, block.proposal, config.max_block_txs)
        block = finalized_with_assembly(block, tx_list, carried)
        chain.replace_block(block)
        finalize(chain, r)

        fees = 0
        for txh in tx_list:
            if txh in settled:
                continue
            settled.add(txh)
            dropped.discard(txh)  # a sibling copy may settle a dropped tx
            mempool.pop(txh, None)
            fees += all_txs[txh].fee

        dag.prune_finalized(dag.cover_set(block.proposal.tip_set))

        limit = config.carryover_retry_limit
        for txh in carried:
            if txh in settled or txh in dropped:
                continue
            attempts = requeues.get(txh, 0) + 1
            if limit is not None and attempts > limit:
                dropped.add(txh)
                mempool.pop(txh, None)
            else:
                requeues[txh] = attempts  # stays queued for new vertices

        if dag.discard_stale_tips(r, config.tip_discard_age):
            for vid in [v for v in frontier.ids if dag.is_stale(v)]:
                frontier.drop(vid)

        for slot, vid, parents in published:
            frontier.apply(vid, parents)

        # greedy_min_cover either covers every target or raises, so the
        # honest coverage ratio is exactly one (vacuously so at round 0)
        delta = Fraction(1)
        rows.append(
            RoundRecord(
                round=r,
                proposal_size=len(block.proposal.tip_set),
                delta=delta,
                fees=fees,
                coverage=len(targets),
                carried_over=len(carried),
            )
        )
        history.append(
            RoundEconomics(
                round=r,
                fees=fees,
                producer_id=block.proposal.proposer_id,
                attacher_ids=ctx.attachers,
                committee_ids=ctx.committee,
                delta=delta,
            )
        )
        appended_prev = appended
        prev_hash = block.block_hash

    ledger = distribute_rewards(
        LedgerAccounts(), history, config.reward_policy, config.n_blocks - 1
    )
    sizes = [row.proposal_size for row in rows]
    aggregates = {
        "mean_proposal_size": float(statistics.fmean(sizes)),
        "stddev_proposal_size": float(statistics.pstdev(sizes)),
        "finalized_height": chain.finalized_height,
        "total_fees_collected": sum(row.fees for row in rows),
        "total_txs_injected": tx_counter,
        "total_txs_settled": len(settled),
        "total_txs_dropped": len(dropped),
        "mempool_remaining": len(mempool),
        "active_vertices": dag.active_count,
        "balances": {node: bal for node, bal in sorted(ledger.balances.items()) if bal},
        "reward_residual": str(ledger.residual),
        "final_block_hash": prev_hash.hex(),
    }
    return SimulationReport(
        config=config.to_dict(),
        rows=rows,
        aggregates=aggregates,
        wall_time_s=time.perf_counter() - started,
        chain=chain,
    )


def bandwidth_estimate(n_tps: int, t_block: int, n_vertices: int) -> tuple[int, int]:
    """Bytes moved per round by the DAG versus a compact block.

    The DAG carries each 32-byte transaction hash once plus a fixed
    per-vertex overhead (signature and two parent links); the compact
    block carries a 6-byte short hash per transaction.
    """
    if n_tps < 0 or t_block < 0 or n_vertices < 0:
        raise ConfigInvalid("bandwidth inputs must be non-negative")
    n_txs = n_tps * t_block
    dag_bytes = HASH_BYTES * n_txs + VERTEX_OVERHEAD_BYTES * n_vertices
    compact_bytes = COMPACT_TX_BYTES * n_txs
    return dag_bytes, compact_bytes


@dataclass(frozen=True)
class Table1Cell:
    strategy: str
    n_vertices: int
    mean_proposal_size: float
    stddev: float
    n_blocks: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "n_vertices": self.n_vertices,
            "mean_proposal_size": self.mean_proposal_size,
            "stddev": self.stddev,
            "n_blocks": self.n_blocks,
            "seed": self.seed,
        }


def table1_experiment(
    strategies,
    sizes,
    n_blocks: int = 100,
    seed: int = 7,
    visibility_horizon: float = 1.0,
) -> list[Table1Cell]:
    """Mean winning-proposal size per (strategy, attacher count) cell.

    Every cell runs the full round pipeline with zero cross-round delay,
    a 10-round tip discard age and an empty mempool (proposal sizes do
    not depend on transaction load), on a seed derived independently per
    cell.  Cells are independent and may be evaluated in parallel as
    long as the output keeps this row order.
    """
    cells = []
    for strategy in strategies:
        if not isinstance(strategy, AttachmentStrategy):
            strategy = AttachmentStrategy.from_name(strategy)
        for n_vertices in sizes:
            cell_seed = int.from_bytes(
                _sha256(b"cell", _be8(seed), strategy.kind.encode("utf-8"), _be8(n_vertices))[:8],
                "big",
            )
            config = SimConfig(
                seed=cell_seed,
                n_stakers=n_vertices,
                n_attachers=n_vertices,
                committee_size=1,
                n_proposers=1,
                strategy=strategy,
                n_blocks=n_blocks,
                tip_discard_age=10,
                mempool_rate=0,
                visibility_horizon=visibility_horizon,
            )
            report = run_simulation(config)
            cells.append(
                Table1Cell(
                    strategy=strategy.kind,
                    n_vertices=n_vertices,
                    mean_proposal_size=report.aggregates["mean_proposal_size"],
                    stddev=report.aggregates["stddev_proposal_size"],
                    n_blocks=n_blocks,
                    seed=seed,
                )
            )
    return cells


@dataclass(frozen=True)
class CensorshipRow:
    depth: int
    soft_cost: Fraction
    hard_feasible: bool

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "soft_cost": float(self.soft_cost),
            "hard_feasible": self.hard_feasible,
        }


def censorship_experiment(config: SimConfig, target_depths) -> list[CensorshipRow]:
    """Censorship cost as a function of target depth.

    Grows a comb-shaped DAG (a spine with one side tip per level, so
    excluding a spine vertex forfeits exactly its continuation), plants
    one fee-bearing transaction per spine vertex and prices the best
    censoring proposal against honest maximal coverage at every
    requested depth.  Depth 0 is the spine tip itself.
    """
    config.validate()
    depths = sorted(set(int(d) for d in target_depths))
    if not depths or depths[0] < 0:
        raise ConfigInvalid("target depths must be non-negative")
    rng = random.Random(config.seed)
    levels = depths[-1] + 2

    dag = Dag()
    spine_txs: list[bytes] = []
    total_fees = 0
    prev = dag.genesis_id
    for level in range(1, levels + 1):
        tx = Transaction(
            tx_hash=_sha256(b"censorship-tx", _be8(config.seed), _be8(level)),
            fee=_geometric_fee(rng),
            sender_id=f"user-{level:06d}",
        )
        total_fees += tx.fee
        spine = make_vertex((prev, prev), f"spine-{level:04d}", level, (tx.tx_hash,))
        dag.attach(spine)
        if level >= 2:
            side = make_vertex((prev, prev), f"side-{level:04d}", level, ())
            dag.attach(side)
        spine_txs.append(tx.tx_hash)
        prev = spine.vertex_id

    params = RoundParams(n_vertices=dag.active_count - 1, round_fees=total_fees)
    out = []
    for depth in depths:
        target = spine_txs[levels - 1 - depth]
        soft_cost, _ = censorship_cost(dag, target, params, config.reward_policy, mode="soft")
        _, feasible = censorship_cost(dag, target, params, config.reward_policy, mode="hard")
        out.append(CensorshipRow(depth=depth, soft_cost=soft_cost, hard_feasible=feasible))
    return out
