"""Database graph materialization and statistics: degrees, connected
components, isolated nodes, and Louvain communities."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .embeddings import EdgeList


class GraphError(Exception):
    pass


@dataclass
class Graph:
    node_count: int
    # CSR adjacency: neighbors of node v are indices[indptr[v]:indptr[v+1]]
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]: self.indptr[v + 1]]


@dataclass
class GraphStats:
    node_count: int
    edge_count: int
    cc_count: int
    isolated_count: int
    degree_min: int
    degree_max: int
    degree_mean: float
    degree_median: int
    cc_min: int
    cc_max: int
    cc_mean: float
    cc_median: int


@dataclass
class Partition:
    labels: np.ndarray  # community id per node
    modularity: float


def build_graph(edges: EdgeList, node_count: int) -> Graph:
    """Symmetric weighted adjacency from an (i < j) edge list; isolated
    nodes retained."""
    src, dst, sim = edges.src, edges.dst, edges.sim
    if len(src) and (src.min() < 0 or max(src.max(), dst.max()) >= node_count):
        raise GraphError("edge index out of range")
    if np.any(src >= dst):
        raise GraphError("edges must satisfy i < j")
    if len(src):
        keys = src * node_count + dst
        if len(np.unique(keys)) != len(keys):
            raise GraphError("duplicate edge in edge list")

    heads = np.concatenate([src, dst])
    tails = np.concatenate([dst, src])
    w = np.concatenate([sim, sim])
    order = np.lexsort((tails, heads))
    heads, tails, w = heads[order], tails[order], w[order]
    indptr = np.zeros(node_count + 1, dtype=np.int64)
    np.add.at(indptr, heads + 1, 1)
    np.cumsum(indptr, out=indptr)
    return Graph(node_count=node_count, indptr=indptr, indices=tails, weights=w)


def connected_components(graph: Graph) -> tuple[np.ndarray, list[int]]:
    """Union-find component labels plus component sizes sorted descending.

    Labels are compacted to 0..k-1 in order of first appearance.
    """
    parent = np.arange(graph.node_count, dtype=np.int64)

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:  # path compression
            parent[x], x = root, parent[x]
        return root

    for v in range(graph.node_count):
        for u in graph.neighbors(v):
            if v < u:
                ru, rv = find(int(u)), find(v)
                if ru != rv:
                    parent[ru] = rv
    labels = np.empty(graph.node_count, dtype=np.int64)
    remap: dict[int, int] = {}
    for v in range(graph.node_count):
        r = find(v)
        if r not in remap:
            remap[r] = len(remap)
        labels[v] = remap[r]
    sizes = np.bincount(labels).tolist()
    sizes.sort(reverse=True)
    return labels, sizes


def _median_lower(values: Sequence) -> float:
    """Lower-middle element for even counts."""
    s = sorted(values)
    if not s:
        return 0
    return s[(len(s) - 1) // 2]


def degree_stats(graph: Graph) -> GraphStats:
    degrees = graph.degrees()
    labels, sizes = connected_components(graph)
    isolated = int(np.sum(degrees == 0))
    if graph.node_count == 0:
        raise GraphError("empty graph has no statistics")
    return GraphStats(
        node_count=graph.node_count,
        edge_count=graph.edge_count,
        cc_count=len(sizes),
        isolated_count=isolated,
        degree_min=int(degrees.min()),
        degree_max=int(degrees.max()),
        degree_mean=float(degrees.mean()),
        degree_median=int(_median_lower(degrees.tolist())),
        cc_min=min(sizes),
        cc_max=max(sizes),
        cc_mean=float(np.mean(sizes)),
        cc_median=int(_median_lower(sizes)),
    )


def modularity(graph: Graph, labels: np.ndarray, use_weights: bool = True) -> float:
    """Weighted Newman modularity Q = sum_c [S_in/2m - (S_tot/2m)^2].

    Defined as 0 for an edgeless graph.
    """
    if len(labels) != graph.node_count:
        raise GraphError("partition does not cover all nodes")
    w = graph.weights if use_weights else np.ones_like(graph.weights)
    two_m = float(w.sum())
    if two_m == 0.0:
        return 0.0
    strength = np.zeros(graph.node_count)
    np.add.at(strength, np.repeat(np.arange(graph.node_count), np.diff(graph.indptr)), w)
    n_comm = int(labels.max()) + 1
    s_tot = np.zeros(n_comm)
    np.add.at(s_tot, labels, strength)
    heads = np.repeat(np.arange(graph.node_count), np.diff(graph.indptr))
    internal = labels[heads] == labels[graph.indices]
    s_in = np.zeros(n_comm)
    np.add.at(s_in, labels[heads[internal]], w[internal])
    return float(np.sum(s_in / two_m - (s_tot / two_m) ** 2))


def _one_louvain_pass(
    indptr, indices, weights, two_m, rng
) -> tuple[np.ndarray, bool]:
    """Local-move phase: greedily reassign nodes to the neighboring
    community with the best modularity gain until no move improves."""
    n = len(indptr) - 1
    strength = np.zeros(n)
    heads = np.repeat(np.arange(n), np.diff(indptr))
    np.add.at(strength, heads, weights)
    labels = np.arange(n)
    comm_tot = strength.copy()
    improved = False
    moved = True
    order = rng.permutation(n)
    while moved:
        moved = False
        for v in order:
            cv = labels[v]
            ki = strength[v]
            # weight from v to each neighboring community
            links: dict[int, float] = {}
            for idx in range(indptr[v], indptr[v + 1]):
                u = indices[idx]
                if u == v:
                    continue
                links[labels[u]] = links.get(labels[u], 0.0) + weights[idx]
            comm_tot[cv] -= ki
            best_comm, best_gain = cv, 0.0
            base = links.get(cv, 0.0) - comm_tot[cv] * ki / two_m
            for c in sorted(links):
                gain = (links[c] - comm_tot[c] * ki / two_m) - base
                if gain > best_gain + 1e-12:
                    best_comm, best_gain = c, gain
            comm_tot[best_comm] += ki
            if best_comm != cv:
                labels[v] = best_comm
                moved = True
                improved = True
    return labels, improved


def _aggregate(indptr, indices, weights, labels):
    """Collapse communities into super-nodes; parallel edges merge, internal
    edges become self-loops."""
    uniq, compact = np.unique(labels, return_inverse=True)
    k = len(uniq)
    heads = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
    a = compact[heads]
    b = compact[indices]
    agg: dict[tuple[int, int], float] = {}
    for x, y, w in zip(a, b, weights):
        agg[(int(x), int(y))] = agg.get((int(x), int(y)), 0.0) + float(w)
    items = sorted(agg.items())
    new_indptr = np.zeros(k + 1, dtype=np.int64)
    new_indices = np.empty(len(items), dtype=np.int64)
    new_weights = np.empty(len(items))
    for pos, ((x, y), w) in enumerate(items):
        new_indptr[x + 1] += 1
        new_indices[pos] = y
        new_weights[pos] = w
    np.cumsum(new_indptr, out=new_indptr)
    return new_indptr, new_indices, new_weights, compact


def louvain(
    graph: Graph,
    seed: int = 0,
    max_passes: int = 20,
    use_weights: bool = True,
    trace: Optional[list] = None,
) -> Partition:
    """Two-phase Louvain with weighted modularity at resolution 1.

    Node visit order is seeded; each pass must strictly increase modularity
    or the loop terminates. An edgeless graph returns the singleton
    partition with modularity 0. When ``trace`` is given, the modularity
    after each accepted pass is appended to it.
    """
    w = graph.weights if use_weights else np.ones_like(graph.weights)
    if len(w) == 0:
        return Partition(labels=np.arange(graph.node_count), modularity=0.0)
    two_m = float(w.sum())
    rng = np.random.default_rng(seed)

    indptr, indices, weights = graph.indptr, graph.indices, w
    mapping = np.arange(graph.node_count)
    best_q = modularity(graph, mapping, use_weights=use_weights)  # singletons
    if trace is not None:
        trace.append(best_q)
    for _ in range(max_passes):
        labels, improved = _one_louvain_pass(indptr, indices, weights, two_m, rng)
        if not improved:
            break
        indptr, indices, weights, compact = _aggregate(indptr, indices, weights, labels)
        candidate = compact[labels[mapping]]
        q = modularity(graph, candidate, use_weights=use_weights)
        if q <= best_q + 1e-12:
            break  # keep the previous (better or equal) mapping
        mapping = candidate
        best_q = q
        if trace is not None:
            trace.append(best_q)
    # compact final labels
    _, final = np.unique(mapping, return_inverse=True)
    return Partition(labels=final, modularity=modularity(graph, final, use_weights=use_weights))


def stats_report(stats: GraphStats, threshold: Optional[float] = None) -> dict:
    """JSON-ready summary report of node, edge, component and degree stats."""
    report = {
        "#Nodes": stats.node_count,
        "#Edges": stats.edge_count,
        "#CCs": stats.cc_count,
        "#INs": stats.isolated_count,
        "Degree": {
            "Min": stats.degree_min,
            "Max": stats.degree_max,
            "Mean": stats.degree_mean,
            "Med": stats.degree_median,
        },
        "ConnectedComponent": {
            "Min": stats.cc_min,
            "Max": stats.cc_max,
            "Mean": stats.cc_mean,
            "Med": stats.cc_median,
        },
    }
    if threshold is not None:
        report["threshold"] = threshold
    return report


def _histogram_pair(values: Sequence[int]) -> dict:
    """Linear and log-binned histograms of nonnegative integer values."""
    values = np.asarray(list(values), dtype=np.int64)
    if values.size == 0:
        return {"linear": {}, "log": {}}
    linear: dict[str, int] = {}
    for v, c in zip(*np.unique(values, return_counts=True)):
        linear[str(int(v))] = int(c)
    log: dict[str, int] = {}
    for v in values:
        lo = 0 if v == 0 else 2 ** int(np.floor(np.log2(max(v, 1))))
        key = f"[{lo},{max(2 * lo, 1)})" if v > 0 else "[0,1)"
        log[key] = log.get(key, 0) + 1
    return {"linear": linear, "log": log}


def export_distributions(
    graph: Graph, partition: Partition, out_dir: Path | str
) -> None:
    """Write degree, component-size and community-size histograms."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _, cc_sizes = connected_components(graph)
    comm_sizes = np.bincount(partition.labels).tolist()
    payloads = {
        "degree_histogram.json": _histogram_pair(graph.degrees().tolist()),
        "component_size_histogram.json": _histogram_pair(cc_sizes),
        "community_size_histogram.json": _histogram_pair(comm_sizes),
    }
    for name, payload in payloads.items():
        with open(out_dir / name, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")


def write_partition(partition: Partition, ids: Sequence[str], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for db_id, comm in zip(ids, partition.labels):
            fh.write(f"{db_id}\t{int(comm)}\n")


def read_partition(path: Path | str) -> dict[str, int]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            db_id, comm = line.rstrip("\n").split("\t")
            out[db_id] = int(comm)
    return out
