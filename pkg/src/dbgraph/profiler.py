"""Node and edge property profiling for the database graph.

Node properties: table/column counts, categorical proportion, foreign-key
density, connectivity, data volume, all-join size estimate, cardinality,
sparsity and entropy averages, plus joined-in cluster/community labels.

Edge properties: Jaccard indices over table names, column names and type
sets, Hellinger distance of type distributions, schema-graph edit distance,
common-element counts, embedding similarity, similarity-rank confidence,
KL divergence and value overlap of shared columns.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import Corpus, DatabaseSchema, TableData

KL_EPSILON = 1e-10
GED_EXACT_NODE_LIMIT = 6


@dataclass
class NodeProfile:
    db_id: str
    n_tables: int
    n_columns: int
    prop_cat: float
    fk_density: float
    avg_conn: float
    data_vol: int = 0
    all_join_size: float = 0.0
    avg_card: float = 0.0
    avg_sparsity: float = 0.0
    avg_entropy: float = 0.0
    cluster_id: Optional[int] = None
    community_id: Optional[int] = None


@dataclass
class EdgeProfile:
    src: str
    dst: str
    jacc_table: float
    jacc_col: float
    jacc_type: float
    hellinger: float
    ged: float
    common_tables: int
    common_cols: int
    common_types: int
    embed_sim: float = 0.0
    sim_conf: float = 0.0
    dist_div: float = 0.0
    overlap_ratio: float = 0.0
    no_shared_columns: bool = False


# -- scalar metrics ----------------------------------------------------------

def jaccard(set_a: set, set_b: set) -> float:
    """|A n B| / |A u B|; two empty sets give 1 by convention."""
    if not set_a and not set_b:
        return 1.0
    return len(set_a & set_b) / len(set_a | set_b)


def hellinger(p: Sequence[float], q: Sequence[float]) -> float:
    """Hellinger distance between two distributions on a shared alphabet."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if abs(p.sum() - 1.0) > 1e-9 or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("hellinger inputs must sum to 1")
    return float(np.sqrt(np.sum((np.sqrt(p) - np.sqrt(q)) ** 2)) / math.sqrt(2.0))


def kl_divergence(p: Sequence[float], q: Sequence[float], epsilon: float = KL_EPSILON) -> float:
    """KL(p || q) in nats with additive-epsilon smoothing and
    renormalization of q."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    q = (q + epsilon) / (q.sum() + epsilon * len(q))
    mask = p > 0
    # q is renormalized, so KL >= 0 up to rounding; clamp the float noise
    return max(0.0, float(np.sum(p[mask] * np.log(p[mask] / q[mask]))))


def column_entropy(values: Sequence[Optional[str]]) -> float:
    """Shannon entropy (bits) of the non-NULL value frequency distribution."""
    counts: dict[str, int] = {}
    for v in values:
        if v is not None:
            counts[v] = counts.get(v, 0) + 1
    total = sum(counts.values())
    if total == 0:
        return 0.0
    h = 0.0
    for c in counts.values():
        frac = c / total
        h -= frac * math.log2(frac)
    return h


# -- node profiling ----------------------------------------------------------

_CATEGORICAL = {"string", "boolean", "other"}


def node_structural(db: DatabaseSchema) -> NodeProfile:
    n_tables = len(db.tables)
    n_columns = db.n_columns
    if n_columns == 0:
        raise ValueError(f"database {db.db_id} has no columns")
    n_cat = sum(
        1
        for t in db.tables
        for c in t.columns
        if c.data_type.value in _CATEGORICAL
    )
    incident = 0
    for fk in db.foreign_keys:
        incident += 2  # one endpoint at each referencing/referenced table
    return NodeProfile(
        db_id=db.db_id,
        n_tables=n_tables,
        n_columns=n_columns,
        prop_cat=n_cat / n_columns,
        fk_density=len(db.foreign_keys) / n_columns,
        avg_conn=incident / n_tables,
    )


def _distinct_non_null(values: Sequence[Optional[str]]) -> set[str]:
    return {v for v in values if v is not None}


def estimate_all_join_size(db: DatabaseSchema, data: dict[str, TableData]) -> float:
    """Estimated row count of joining all tables.

    Tables in one foreign-key component are joined along a deterministic
    spanning order with |R join S| = |R|*|S| / max(V(R,a), V(S,b));
    unrelated components combine by cartesian product.
    """
    names = [t.name for t in db.tables]
    rows = {t.name: data[t.name].row_count if t.name in data else t.row_count
            for t in db.tables}

    # FK adjacency between tables
    adj: dict[str, list[tuple[str, str, str, str]]] = {n: [] for n in names}
    for fk in sorted(
        db.foreign_keys,
        key=lambda f: (f.from_table, f.from_column, f.to_table, f.to_column),
    ):
        adj[fk.from_table].append((fk.to_table, fk.from_table, fk.from_column, fk.to_column))
        adj[fk.to_table].append((fk.from_table, fk.to_table, fk.to_column, fk.from_column))

    def distinct(table: str, column: str) -> int:
        if table in data:
            return len(_distinct_non_null(data[table].cells.get(column, [])))
        return 0

    visited: set[str] = set()
    total = 1.0
    for start in names:
        if start in visited:
            continue
        visited.add(start)
        size = float(rows[start])
        frontier = [start]
        while frontier:
            current = frontier.pop(0)
            for other, own, own_col, other_col in adj[current]:
                if other in visited:
                    continue
                visited.add(other)
                v_own = distinct(own, own_col)
                v_other = distinct(other, other_col)
                denom = max(v_own, v_other, 1)
                size = size * rows[other] / denom
                frontier.append(other)
        total *= size
    return total


def node_statistical(
    db: DatabaseSchema, data: dict[str, TableData], corpus_root: Optional[Path] = None
) -> NodeProfile:
    """Fill the statistical block on top of the structural one."""
    profile = node_structural(db)
    cards: list[float] = []
    sparsities: list[float] = []
    entropies: list[float] = []
    for table in db.tables:
        tdata = data[table.name]
        for col in table.columns:
            values = tdata.cells.get(col.name, [])
            cards.append(len(_distinct_non_null(values)))
            n = len(values)
            sparsities.append(sum(1 for v in values if v is None) / n if n else 0.0)
            entropies.append(column_entropy(values))
    profile.avg_card = float(np.mean(cards)) if cards else 0.0
    profile.avg_sparsity = float(np.mean(sparsities)) if sparsities else 0.0
    profile.avg_entropy = float(np.mean(entropies)) if entropies else 0.0
    profile.all_join_size = estimate_all_join_size(db, data)
    if corpus_root is not None:
        profile.data_vol = sum(
            os.path.getsize(Path(corpus_root) / db.db_id / t.data_file)
            for t in db.tables
        )
    return profile


# -- schema graph edit distance ---------------------------------------------

@dataclass(frozen=True)
class SchemaGraph:
    """Directed graph: tables as nodes, foreign keys as edges."""
    nodes: tuple[str, ...]
    edges: frozenset  # of (from_table, to_table)

    @classmethod
    def of(cls, db: DatabaseSchema) -> "SchemaGraph":
        return cls(
            nodes=tuple(sorted(t.name.lower() for t in db.tables)),
            edges=frozenset(
                (fk.from_table.lower(), fk.to_table.lower()) for fk in db.foreign_keys
            ),
        )


def _mapping_cost(a: SchemaGraph, b: SchemaGraph, mapping: dict[str, Optional[str]]) -> int:
    """Edit cost of one node mapping: unmapped nodes are deleted/inserted,
    edges compared under the induced correspondence."""
    mapped_b = {v for v in mapping.values() if v is not None}
    cost = sum(1 for v in mapping.values() if v is None)  # node deletions
    cost += len(b.nodes) - len(mapped_b)  # node insertions
    translated = set()
    for (x, y) in a.edges:
        mx, my = mapping.get(x), mapping.get(y)
        if mx is None or my is None or (mx, my) not in b.edges:
            cost += 1  # edge deletion
        else:
            translated.add((mx, my))
    cost += len(b.edges) - len(translated)  # edge insertions
    return cost


def _ged_exact(a: SchemaGraph, b: SchemaGraph) -> int:
    """Branch and bound over injective node mappings (small graphs only).

    Nodes of ``a`` are assigned in order to an unused node of ``b`` or to
    deletion; edge costs accrue as soon as both endpoints are decided.
    """
    a_nodes, b_nodes = list(a.nodes), list(b.nodes)
    na, nb = len(a_nodes), len(b_nodes)
    best = _mapping_cost(a, b, {n: None for n in a_nodes})  # all-delete bound
    best = min(best, _ged_approx(a, b))

    def pair_cost(i: int, j: int, assignment: list) -> int:
        """Edge edits between a-nodes i and j (j <= i) under the partial map."""
        cost = 0
        directions = (
            ((a_nodes[j], a_nodes[i]), (assignment[j], assignment[i])),
            ((a_nodes[i], a_nodes[j]), (assignment[i], assignment[j])),
        )
        if i == j:
            directions = directions[:1]
        for a_edge, b_edge in directions:
            a_has = a_edge in a.edges
            if assignment[i] is None or assignment[j] is None:
                cost += 1 if a_has else 0
            else:
                b_has = b_edge in b.edges
                cost += 1 if a_has != b_has else 0
        return cost

    assignment: list = [None] * na

    def rec(i: int, used: set, cost: int) -> None:
        nonlocal best
        # remaining b-nodes that no future a-node can absorb must be inserted
        lower = cost + max(0, (nb - len(used)) - (na - i))
        if lower >= best:
            return
        if i == na:
            leaf = cost + (nb - len(used))
            mapped = set(used)
            for (x, y) in b.edges:
                if x not in mapped or y not in mapped:
                    leaf += 1
            best = min(best, leaf)
            return
        for choice in list(b_nodes) + [None]:
            if choice is not None and choice in used:
                continue
            assignment[i] = choice
            delta = 1 if choice is None else 0  # node deletion
            for j in range(i + 1):
                delta += pair_cost(i, j, assignment)
            if choice is None:
                rec(i + 1, used, cost + delta)
            else:
                used.add(choice)
                rec(i + 1, used, cost + delta)
                used.remove(choice)
            assignment[i] = None
    rec(0, set(), 0)
    return int(best)


def _ged_approx(a: SchemaGraph, b: SchemaGraph) -> int:
    """Upper bound: map identically named tables to each other, edit the
    rest."""
    common = set(a.nodes) & set(b.nodes)
    mapping: dict[str, Optional[str]] = {
        n: (n if n in common else None) for n in a.nodes
    }
    return _mapping_cost(a, b, mapping)


def schema_ged(
    a: SchemaGraph, b: SchemaGraph, exact_node_limit: int = GED_EXACT_NODE_LIMIT
) -> float:
    """Unit-cost graph edit distance between two schema graphs; exact for
    small graphs, name-anchored upper bound otherwise."""
    if max(len(a.nodes), len(b.nodes)) <= exact_node_limit:
        return float(_ged_exact(a, b))
    return float(_ged_approx(a, b))


# -- edge profiling ----------------------------------------------------------

def _type_counts(db: DatabaseSchema) -> dict[str, int]:
    counts: dict[str, int] = {}
    for t in db.tables:
        for c in t.columns:
            counts[c.data_type.value] = counts.get(c.data_type.value, 0) + 1
    return counts


def edge_structural(db_a: DatabaseSchema, db_b: DatabaseSchema) -> EdgeProfile:
    tables_a = {t.name.strip().lower() for t in db_a.tables}
    tables_b = {t.name.strip().lower() for t in db_b.tables}
    cols_a = {c.name.strip().lower() for t in db_a.tables for c in t.columns}
    cols_b = {c.name.strip().lower() for t in db_b.tables for c in t.columns}
    counts_a = _type_counts(db_a)
    counts_b = _type_counts(db_b)
    types_a, types_b = set(counts_a), set(counts_b)

    support = sorted(types_a | types_b)
    total_a = sum(counts_a.values())
    total_b = sum(counts_b.values())
    p = [counts_a.get(t, 0) / total_a for t in support]
    q = [counts_b.get(t, 0) / total_b for t in support]

    return EdgeProfile(
        src=db_a.db_id,
        dst=db_b.db_id,
        jacc_table=jaccard(tables_a, tables_b),
        jacc_col=jaccard(cols_a, cols_b),
        jacc_type=jaccard(types_a, types_b),
        hellinger=hellinger(p, q),
        ged=schema_ged(SchemaGraph.of(db_a), SchemaGraph.of(db_b)),
        common_tables=len(tables_a & tables_b),
        common_cols=len(cols_a & cols_b),
        common_types=len(types_a & types_b),
    )


def _column_values(db: DatabaseSchema, data: dict[str, TableData]) -> dict[str, list[str]]:
    """Non-NULL values pooled per lowercased column name across tables."""
    pooled: dict[str, list[str]] = {}
    for t in db.tables:
        tdata = data[t.name]
        for c in t.columns:
            key = c.name.strip().lower()
            pooled.setdefault(key, []).extend(
                v for v in tdata.cells.get(c.name, []) if v is not None
            )
    return pooled


def edge_statistical(
    db_a: DatabaseSchema,
    db_b: DatabaseSchema,
    data_a: dict[str, TableData],
    data_b: dict[str, TableData],
    epsilon: float = KL_EPSILON,
) -> EdgeProfile:
    """Structural profile plus shared-column divergence and value overlap."""
    profile = edge_structural(db_a, db_b)
    values_a = _column_values(db_a, data_a)
    values_b = _column_values(db_b, data_b)
    shared = sorted(set(values_a) & set(values_b))
    if not shared:
        profile.no_shared_columns = True
        return profile

    divergences: list[float] = []
    overlaps: list[float] = []
    for col in shared:
        va, vb = values_a[col], values_b[col]
        support = sorted(set(va) | set(vb))
        if support:
            ca = {v: 0 for v in support}
            cb = {v: 0 for v in support}
            for v in va:
                ca[v] += 1
            for v in vb:
                cb[v] += 1
            ta, tb = max(sum(ca.values()), 1), max(sum(cb.values()), 1)
            p = [ca[v] / ta for v in support]
            q = [cb[v] / tb for v in support]
            divergences.append(kl_divergence(p, q, epsilon))
        else:
            divergences.append(0.0)
        overlaps.append(jaccard(set(va), set(vb)) if va or vb else 1.0)
    profile.dist_div = float(np.mean(divergences))
    profile.overlap_ratio = float(np.mean(overlaps))
    return profile


def sim_conf(edge_sims: Sequence[float]) -> np.ndarray:
    """Per-edge confidence: fraction of edges with strictly lower
    similarity (empirical CDF rank)."""
    sims = np.asarray(edge_sims, dtype=np.float64)
    if sims.size == 0:
        raise ValueError("sim_conf needs at least one edge")
    order = np.sort(sims)
    below = np.searchsorted(order, sims, side="left")
    return below / sims.size


# -- table writers -----------------------------------------------------------

NODE_HEADER = [
    "db_id", "#Tables", "#Columns", "PropCat", "FKDensity", "AvgConn",
    "DataVol", "AllJoinSize", "AvgCard", "AvgSparsity", "AvgEntropy",
    "Cluster", "Community",
]

EDGE_HEADER = [
    "src", "dst", "JaccTable", "JaccCol", "JaccType", "HellingerDist", "GED",
    "CommonTables", "CommonCols", "CommonTypes", "EmbedSim", "SimConf",
    "DistDiv", "OverlapRatio",
]


def write_node_profiles(profiles: Sequence[NodeProfile], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(NODE_HEADER) + "\n")
        for p in profiles:
            fh.write(
                f"{p.db_id}\t{p.n_tables}\t{p.n_columns}\t{p.prop_cat:.6f}\t"
                f"{p.fk_density:.6f}\t{p.avg_conn:.6f}\t{p.data_vol}\t"
                f"{p.all_join_size:.6e}\t{p.avg_card:.6f}\t{p.avg_sparsity:.6f}\t"
                f"{p.avg_entropy:.6f}\t"
                f"{'' if p.cluster_id is None else p.cluster_id}\t"
                f"{'' if p.community_id is None else p.community_id}\n"
            )


def write_edge_profiles(profiles: Sequence[EdgeProfile], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(EDGE_HEADER) + "\n")
        for p in profiles:
            fh.write(
                f"{p.src}\t{p.dst}\t{p.jacc_table:.6f}\t{p.jacc_col:.6f}\t"
                f"{p.jacc_type:.6f}\t{p.hellinger:.6f}\t{p.ged:.6f}\t"
                f"{p.common_tables}\t{p.common_cols}\t{p.common_types}\t"
                f"{p.embed_sim:.6f}\t{p.sim_conf:.6f}\t{p.dist_div:.6f}\t"
                f"{p.overlap_ratio:.6f}\n"
            )
