"""Independent oracles and random DAG builders used across the suite.

Everything here recomputes results from first principles (plain BFS,
exhaustive enumeration, recursive hashing) so the production code paths
are checked against genuinely separate implementations.
"""

import hashlib
import random
from itertools import combinations

from minagree.dag import Dag, make_vertex


def h32(label) -> bytes:
    if isinstance(label, str):
        label = label.encode("utf-8")
    return hashlib.sha256(label).digest()


def bfs_cover(dag: Dag, roots) -> set:
    """Transitive closure over parent references by plain BFS.

    Walks the raw vertex records only; pruned markers are not expanded
    and not counted.
    """
    seen = set()
    queue = [r for r in roots]
    while queue:
        vid = queue.pop()
        if vid in seen or vid not in dag.vertices:
            continue
        seen.add(vid)
        queue.extend(dag.vertices[vid].parents)
    return seen


def in_degree_zero(dag: Dag) -> set:
    """Brute-force tip computation over the active vertex records."""
    referenced = set()
    for vertex in dag.vertices.values():
        referenced.update(vertex.parents)
    return {vid for vid in dag.vertices if vid not in referenced}


def grow_random_dag(rng: random.Random, n_vertices: int, txs_per_vertex: int = 0) -> tuple[Dag, list]:
    """Random DAG grown by attaching to uniformly chosen existing vertices."""
    dag = Dag()
    ids = [dag.genesis_id]
    for k in range(n_vertices):
        parents = (rng.choice(ids), rng.choice(ids))
        txs = tuple(
            h32(f"tx-{rng.getrandbits(64)}-{k}-{t}") for t in range(txs_per_vertex)
        )
        vertex = make_vertex(parents, f"node-{k}", k + 1, txs)
        dag.attach(vertex)
        ids.append(vertex.vertex_id)
    return dag, ids


def brute_force_best_pair(dag: Dag, tips) -> tuple:
    """Exhaustive joint-cardinality argmax with the ascending-id tie rule."""
    best = None
    tips = sorted(tips)
    for a, b in combinations(tips, 2):
        value = dag.cover_cardinality((a, b))
        key = (-value, a, b)
        if best is None or key < best[0]:
            best = (key, (a, b))
    return best[1]


def brute_force_min_cover(dag: Dag, targets, tips) -> int:
    """Size of the smallest tip subset covering all targets (exhaustive)."""
    targets = set(targets)
    tips = sorted(tips)
    if not targets:
        return 0
    for size in range(1, len(tips) + 1):
        for subset in combinations(tips, size):
            if targets <= dag.cover_set(subset):
                return size
    raise AssertionError("targets not coverable by any tip subset")


def reference_merkle(leaves) -> bytes:
    """Recursive Merkle root, structured unlike the production version."""
    leaves = list(leaves)
    if not leaves:
        return b"\x00" * 32
    if len(leaves) == 1:
        return leaves[0]
    if len(leaves) % 2:
        leaves.append(leaves[-1])
    mid = []
    for i in range(0, len(leaves), 2):
        mid.append(hashlib.sha256(leaves[i] + leaves[i + 1]).digest())
    return reference_merkle(mid)
